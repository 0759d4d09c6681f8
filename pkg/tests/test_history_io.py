import struct

import numpy as np
import pytest

from src.core.errors import BadMagicError, HistoryFormatError, TruncatedFileError, VersionMismatchError
from src.core.modules.history_io import HEADER_SIZE, read_histories, write_histories
from src.core.modules.simulator import HISTORY_DTYPE, HistoryBatch


def random_batch(n: int, seed: int = 0) -> HistoryBatch:
    rng = np.random.default_rng(seed)
    records = np.zeros(n, dtype=HISTORY_DTYPE)
    for name in HISTORY_DTYPE.names:
        records[name] = rng.normal(0.0, 50.0, n)
    records["wepl"] = np.abs(records["wepl"])
    return HistoryBatch(records)


def test_round_trip_is_bitwise(tmp_path):
    batch = random_batch(1000)
    path = tmp_path / "h.pcth"
    write_histories(str(path), batch)
    assert path.stat().st_size == HEADER_SIZE + 1000 * 13 * 8
    assert read_histories(str(path)).records.tobytes() == batch.records.tobytes()


def test_empty_batch_writes_header_only(tmp_path):
    path = tmp_path / "empty.pcth"
    write_histories(str(path), HistoryBatch())
    assert path.stat().st_size == HEADER_SIZE
    assert len(read_histories(str(path))) == 0


def test_header_layout(tmp_path):
    path = tmp_path / "h.pcth"
    write_histories(str(path), random_batch(3))
    raw = path.read_bytes()
    assert raw[:4] == b"PCTH"
    assert struct.unpack("<HHQ", raw[4:HEADER_SIZE]) == (1, 104, 3)


def test_bad_magic(tmp_path):
    path = tmp_path / "h.pcth"
    write_histories(str(path), random_batch(2))
    raw = bytearray(path.read_bytes())
    raw[:4] = b"XXXX"
    path.write_bytes(bytes(raw))
    with pytest.raises(BadMagicError) as excinfo:
        read_histories(str(path))
    assert excinfo.value.exit_code == 3


def test_version_mismatch(tmp_path):
    path = tmp_path / "h.pcth"
    write_histories(str(path), random_batch(2))
    raw = bytearray(path.read_bytes())
    raw[4:6] = struct.pack("<H", 2)
    path.write_bytes(bytes(raw))
    with pytest.raises(VersionMismatchError):
        read_histories(str(path))


def test_truncated_file_names_the_record(tmp_path):
    path = tmp_path / "h.pcth"
    write_histories(str(path), random_batch(10))
    raw = path.read_bytes()
    path.write_bytes(raw[:HEADER_SIZE + 7 * 104 + 50])
    with pytest.raises(TruncatedFileError) as excinfo:
        read_histories(str(path))
    assert excinfo.value.record_index == 7
    assert isinstance(excinfo.value, HistoryFormatError)


def test_truncated_header(tmp_path):
    path = tmp_path / "h.pcth"
    path.write_bytes(b"PCTH\x01\x00")
    with pytest.raises(TruncatedFileError):
        read_histories(str(path))
