"""Checksum-verified download with a local cache.

A file is only ever served from the cache after its sha256 matches the
manifest (or the pin recorded at the first verified download). A mismatch is
a hard failure, never a silent retry: a corrupted or tampered source must be
looked at by a human.
"""

import hashlib
import json
import os
import shutil
import tempfile
import urllib.request


class ChecksumError(RuntimeError):
    pass


class UnpinnedError(RuntimeError):
    """Raised when a manifest has no checksum and pinning was not requested."""


def sha256_of(path, chunk=1 << 20):
    h = hashlib.sha256()
    with open(path, "rb") as f:
        while True:
            block = f.read(chunk)
            if not block:
                break
            h.update(block)
    return h.hexdigest()


def _pins_path(cache_dir):
    return os.path.join(cache_dir, "pins.json")


def _load_pins(cache_dir):
    try:
        with open(_pins_path(cache_dir), "r", encoding="utf-8") as f:
            return json.load(f)
    except FileNotFoundError:
        return {}


def _store_pin(cache_dir, url, digest):
    pins = _load_pins(cache_dir)
    pins[url] = digest
    with open(_pins_path(cache_dir), "w", encoding="utf-8") as f:
        json.dump(pins, f, indent=2, sort_keys=True)
        f.write("\n")


def _download(url, dest):
    tmp_fd, tmp = tempfile.mkstemp(dir=os.path.dirname(dest))
    os.close(tmp_fd)
    try:
        with urllib.request.urlopen(url) as response, open(tmp, "wb") as out:
            shutil.copyfileobj(response, out)
        os.replace(tmp, dest)
    finally:
        if os.path.exists(tmp):
            os.unlink(tmp)


def fetch_file(url, expected_sha256, cache_dir, pin=False):
    """Return a verified local path for url, downloading at most once.

    expected_sha256 may be None; then a previously pinned digest is used, or
    (with pin=True) the first download's digest is recorded as the pin.
    """
    os.makedirs(cache_dir, exist_ok=True)
    expected = expected_sha256 or _load_pins(cache_dir).get(url)
    dest = os.path.join(cache_dir, os.path.basename(url))

    if expected is not None and os.path.exists(dest):
        got = sha256_of(dest)
        if got != expected:
            raise ChecksumError(f"{dest}: sha256 {got} does not match expected {expected}")
        return dest

    if expected is None and not pin:
        raise UnpinnedError(
            f"{url}: no pinned checksum; rerun with --pin after verifying the source "
            "to record it")

    if not os.path.exists(dest):
        _download(url, dest)
    got = sha256_of(dest)
    if expected is None:
        _store_pin(cache_dir, url, got)
        print(f"pinned {url} sha256={got}")
    elif got != expected:
        raise ChecksumError(f"{dest}: sha256 {got} does not match expected {expected}")
    return dest


def fetch(manifest, cache_dir, pin=False):
    """Fetch both files of a scene manifest; returns (data_path, gt_path)."""
    data_path = fetch_file(manifest.data_url, manifest.data_sha256, cache_dir, pin=pin)
    gt_path = fetch_file(manifest.gt_url, manifest.gt_sha256, cache_dir, pin=pin)
    return data_path, gt_path
