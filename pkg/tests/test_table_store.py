import pytest

from src.kronml.characters import character_table, compute_character_table
from src.kronml.errors import CharacterTableError
from src.kronml.storage import atomic_open, write_text_atomic
from src.kronml.table_store import CharacterTableStore


def test_atomic_write_replaces_file(tmp_path):
    target = tmp_path / "sub" / "out.txt"
    write_text_atomic(target, "first\n")
    write_text_atomic(target, "second\n")
    assert target.read_text() == "second\n"
    assert [p.name for p in target.parent.iterdir()] == ["out.txt"]


def test_atomic_write_leaves_nothing_on_error(tmp_path):
    target = tmp_path / "out.txt"
    with pytest.raises(RuntimeError):
        with atomic_open(target, 'w') as handle:
            handle.write("partial")
            raise RuntimeError("interrupted")
    assert not target.exists()
    assert list(tmp_path.iterdir()) == []


def test_load_or_build_caches_table(tmp_path):
    store = CharacterTableStore(tmp_path)
    assert not store.exists(6)
    table = store.load_or_build(6)
    assert store.exists(6)
    assert store.path_for(6).name == "chartab_6.csv"
    assert store.load_or_build(6) == table
    assert store.cached_degrees() == [6]


def test_character_table_uses_cache_dir(tmp_path):
    table = character_table(5, cache_dir=str(tmp_path))
    assert table == compute_character_table(5)
    assert (tmp_path / "chartab_5.csv").is_file()


def test_checksum_is_stable(tmp_path):
    store = CharacterTableStore(tmp_path)
    store.load_or_build(4)
    first = store.checksum(4)
    store.save_to_file(compute_character_table(4))
    assert store.checksum(4) == first
    assert len(first) == 64


def test_corrupted_cache_is_reported(tmp_path):
    store = CharacterTableStore(tmp_path)
    store.load_or_build(5)
    path = store.path_for(5)
    lines = path.read_text().splitlines()
    lines[-1] = ",".join(str(int(v) + 1) for v in lines[-1].split(","))
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(CharacterTableError):
        store.load_or_build(5)


def test_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        CharacterTableStore(tmp_path).load_from_file(tmp_path / "chartab_9.csv")


def test_cache_of_another_degree_is_rejected(tmp_path):
    store = CharacterTableStore(tmp_path)
    store.save_to_file(compute_character_table(5), store.path_for(6))
    with pytest.raises(CharacterTableError, match="S_5"):
        store.load_or_build(6)
