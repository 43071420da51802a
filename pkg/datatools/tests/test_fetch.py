import os

import pytest

from hsic_datatools.fetch import (ChecksumError, UnpinnedError, fetch_file,
                                  sha256_of)


@pytest.fixture
def source(tmp_path):
    src = tmp_path / "remote" / "scene.mat"
    src.parent.mkdir()
    src.write_bytes(b"pretend-mat-bytes" * 100)
    return src


def file_url(path):
    return "file://" + str(path)


def test_fresh_fetch_verifies_and_caches(source, tmp_path):
    cache = tmp_path / "cache"
    digest = sha256_of(source)
    local = fetch_file(file_url(source), digest, cache)
    assert os.path.dirname(local) == str(cache)
    assert sha256_of(local) == digest


def test_cache_hit_never_touches_source(source, tmp_path):
    cache = tmp_path / "cache"
    digest = sha256_of(source)
    fetch_file(file_url(source), digest, cache)
    source.unlink()  # a re-download would now fail
    local = fetch_file(file_url(source), digest, cache)
    assert sha256_of(local) == digest


def test_corrupted_cache_aborts(source, tmp_path):
    cache = tmp_path / "cache"
    digest = sha256_of(source)
    local = fetch_file(file_url(source), digest, cache)
    with open(local, "ab") as f:
        f.write(b"junk")
    with pytest.raises(ChecksumError):
        fetch_file(file_url(source), digest, cache)


def test_checksum_mismatch_on_download_aborts(source, tmp_path):
    with pytest.raises(ChecksumError):
        fetch_file(file_url(source), "0" * 64, tmp_path / "cache")


def test_unpinned_manifest_refuses_without_pin(source, tmp_path):
    with pytest.raises(UnpinnedError):
        fetch_file(file_url(source), None, tmp_path / "cache")


def test_pin_records_then_enforces(source, tmp_path, capsys):
    cache = tmp_path / "cache"
    local = fetch_file(file_url(source), None, cache, pin=True)
    assert "pinned" in capsys.readouterr().out
    digest = sha256_of(local)
    # subsequent fetches use the recorded pin, no --pin needed
    assert fetch_file(file_url(source), None, cache) == local
    with open(local, "ab") as f:
        f.write(b"tamper")
    with pytest.raises(ChecksumError):
        fetch_file(file_url(source), None, cache)
    assert sha256_of(source) == digest
