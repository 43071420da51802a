"""Built-in verification suites behind `docnn selfcheck`: the fold-compose
identity, gradient correctness against finite differences, and the metric
formulas against direct tallies. Exits nonzero on any failure.
"""

import numpy as np

from . import layers, metrics, network
from . import train as training
from .layers import DoConvKernel
from .train import rng_stream


def _rel_err(a, b):
    scale = max(np.abs(a).max(), np.abs(b).max(), 1e-30)
    return np.abs(a - b).max() / scale


def check_fold_equivalence(cases_per_combo=2, seed=0):
    rng = rng_stream(seed)
    worst = 0.0
    count = 0
    for kernel in (1, 3):
        for c_in in (1, 3, 8):
            for c_out in (1, 3, 8):
                for d_mul in (1, 9, 18):
                    for same_pad in (False, True):
                        for _ in range(cases_per_combo):
                            h, w = rng.integers(kernel, 8, size=2) + kernel
                            x = rng.normal(size=(h, w, c_in))
                            k = DoConvKernel(
                                depthwise=rng.normal(size=(kernel * kernel, d_mul, c_in)),
                                pointwise=rng.normal(size=(c_out, d_mul, c_in)),
                                bias=rng.normal(size=c_out), kh=kernel, kw=kernel)
                            composed = layers.doconv_compose(x, k, same_pad)
                            folded = layers.conv_std(x, layers.doconv_fold(k), same_pad)
                            worst = max(worst, _rel_err(composed, folded))
                            count += 1
    ok = worst <= 1e-10
    return ok, f"fold-compose equivalence: {count} cases, max rel err {worst:.3e}"


def _finite_diff(model, batch, labels, arr, index, eps=1e-5):
    orig = arr[index]
    arr[index] = orig + eps
    up, _ = training.backward(model, batch, labels)
    arr[index] = orig - eps
    down, _ = training.backward(model, batch, labels)
    arr[index] = orig
    return (up - down) / (2 * eps)


def check_gradients(seed=0, coords_per_tensor=12):
    rng = rng_stream(seed)
    config = network.NetworkConfig(num_classes=2, in_channels=3, input_size=5,
                                   mid_channels=4, out_channels=6,
                                   layer_type="doconv", drc_enabled=True, d_mul=9)
    model = network.build(config, rng)
    for p in network.parameters(model).values():
        p += rng.normal(scale=0.05, size=p.shape)
    batch = rng.normal(size=(3, 5, 5, 3))
    labels = rng.integers(0, 2, size=3)
    _, grads = training.backward(model, batch, labels)
    worst = 0.0
    for name, arr in network.parameters(model).items():
        flat_ids = rng.permutation(arr.size)[:coords_per_tensor]
        for flat in flat_ids:
            index = np.unravel_index(flat, arr.shape)
            numeric = _finite_diff(model, batch, labels, arr, index)
            analytic = grads[name][index]
            err = abs(analytic - numeric) / max(abs(analytic), abs(numeric), 1e-6 / 1e-4)
            worst = max(worst, err)
    ok = worst <= 1e-4
    return ok, f"gradient check: sampled coordinates, max rel err {worst:.3e}"


def check_metrics(seed=0, instances=50):
    rng = rng_stream(seed)
    for _ in range(instances):
        c = int(rng.integers(2, 7))
        n = int(rng.integers(1, 300))
        t = rng.integers(0, c, size=n)
        p = rng.integers(0, c, size=n)
        cm = metrics.confusion(t, p, c)
        oa_direct = int((t == p).sum()) / n
        pe_direct = int((np.bincount(t, minlength=c) * np.bincount(p, minlength=c)).sum()) / (n * n)
        kappa_direct = 1.0 if pe_direct == 1.0 and oa_direct == 1.0 else (
            0.0 if pe_direct == 1.0 else (oa_direct - pe_direct) / (1 - pe_direct))
        if metrics.overall_accuracy(cm) != oa_direct or metrics.kappa(cm) != kappa_direct:
            return False, "metrics oracle: confusion-matrix path disagrees with direct tally"
    hand = np.array([[40, 10], [5, 45]])
    if not (abs(metrics.overall_accuracy(hand) - 0.85) < 1e-15
            and abs(metrics.kappa(hand) - 0.70) < 1e-15):
        return False, "metrics oracle: hand case [[40,10],[5,45]] failed"
    return True, f"metrics oracle: {instances} random instances + hand case exact"


def run_selfcheck(verbose=True):
    checks = (check_fold_equivalence, check_gradients, check_metrics)
    failures = 0
    for check in checks:
        ok, message = check()
        failures += 0 if ok else 1
        if verbose:
            print(f"[{'PASS' if ok else 'FAIL'}] {message}")
    return 0 if failures == 0 else 1
