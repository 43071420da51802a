"""Scene manifests: where each public cube lives, what shape it must have,
and the checksum it must match.

The three benchmark scenes are distributed as MATLAB files. Their sha256
values are pinned on the first manually verified download (fetch --pin) and
kept in the cache's pins.json; CI and tests only ever use local fixtures.
Band counts follow whatever the pinned source provides (the customary
water-absorption-band removal differs between mirrors), so converters trust
the manifest, and downstream readers trust the container header.
"""

from dataclasses import dataclass, field


@dataclass
class SceneManifest:
    name: str
    data_url: str
    gt_url: str
    data_key: str                 # variable name inside the MAT file
    gt_key: str
    height: int
    width: int
    bands: int
    class_names: list
    data_sha256: str = None       # None until pinned by a verified download
    gt_sha256: str = None
    extra: dict = field(default_factory=dict)

    @property
    def num_classes(self):
        return len(self.class_names)


_EHU = "https://www.ehu.eus/ccwintco/uploads"

PAVIA_UNIVERSITY = SceneManifest(
    name="pu",
    data_url=f"{_EHU}/e/ee/PaviaU.mat",
    gt_url=f"{_EHU}/5/50/PaviaU_gt.mat",
    data_key="paviaU",
    gt_key="paviaU_gt",
    height=610, width=340, bands=103,
    class_names=[
        "Asphalt", "Meadows", "Gravel", "Trees", "Painted metal sheets",
        "Bare Soil", "Bitumen", "Self-Blocking Bricks", "Shadows",
    ],
)

SALINAS = SceneManifest(
    name="sa",
    data_url=f"{_EHU}/a/a3/Salinas_corrected.mat",
    gt_url=f"{_EHU}/f/fa/Salinas_gt.mat",
    data_key="salinas_corrected",
    gt_key="salinas_gt",
    height=512, width=217, bands=204,
    class_names=[
        "Brocoli_green_weeds_1", "Brocoli_green_weeds_2", "Fallow",
        "Fallow_rough_plow", "Fallow_smooth", "Stubble", "Celery",
        "Grapes_untrained", "Soil_vinyard_develop",
        "Corn_senesced_green_weeds", "Lettuce_romaine_4wk",
        "Lettuce_romaine_5wk", "Lettuce_romaine_6wk", "Lettuce_romaine_7wk",
        "Vinyard_untrained", "Vinyard_vertical_trellis",
    ],
)

INDIAN_PINES = SceneManifest(
    name="ip",
    data_url=f"{_EHU}/6/67/Indian_pines_corrected.mat",
    gt_url=f"{_EHU}/c/c4/Indian_pines_gt.mat",
    data_key="indian_pines_corrected",
    gt_key="indian_pines_gt",
    height=145, width=145, bands=200,
    class_names=[
        "Alfalfa", "Corn-notill", "Corn-mintill", "Corn", "Grass-pasture",
        "Grass-trees", "Grass-pasture-mowed", "Hay-windrowed", "Oats",
        "Soybean-notill", "Soybean-mintill", "Soybean-clean", "Wheat",
        "Woods", "Buildings-Grass-Trees-Drives", "Stone-Steel-Towers",
    ],
)

SCENES = {m.name: m for m in (PAVIA_UNIVERSITY, SALINAS, INDIAN_PINES)}
