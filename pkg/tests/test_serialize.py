import struct

import numpy as np
import pytest

from stackparse.conll import read_conll
from stackparse.errors import ModelFormatError
from stackparse.model import ModelConfig, ParserModel
from stackparse.serialize import MAGIC, load_model, read_container, save_model, write_container
from stackparse.toydata import bundled_path
from stackparse.vocab import build_vocab, read_embeddings

CFG = ModelConfig(word_dim=4, pretrained_dim=10, pos_dim=3, token_dim=5, hidden_dim=4, layers=2,
                  action_dim=3, rel_dim=3, state_dim=4)


@pytest.fixture(scope="module")
def model():
    tb = read_conll(bundled_path("toy_train.conll"))
    emb = read_embeddings(bundled_path("toy_embeddings.txt"))
    return ParserModel(CFG, build_vocab(tb), emb, seed=5)


@pytest.fixture
def saved(model, tmp_path):
    path = tmp_path / "m.bin"
    save_model(model, path)
    return path


def test_round_trip_bit_exact(model, saved):
    back = load_model(saved)
    assert back.config == model.config and back.vocab == model.vocab
    assert back.store.names() == model.store.names()
    for name in model.store.names():
        assert np.array_equal(back.store[name].value, model.store[name].value)
        assert back.store[name].trainable == model.store[name].trainable
    assert back.pretrained_words == model.pretrained_words


def test_round_trip_same_parses(model, saved):
    back = load_model(saved)
    dev = read_conll(bundled_path("toy_dev.conll"))
    for s in dev:
        assert back.parse(s.without_tree()) == model.parse(s.without_tree())


def test_layout(saved):
    data = saved.read_bytes()
    assert data[:8] == MAGIC
    version, hdr_len = struct.unpack_from("<IQ", data, 8)
    assert version == 1
    header, arrays = read_container(saved)
    assert set(header) == {"config", "vocab", "pretrained_words"}
    assert arrays["pretrained"][1] is False and arrays["out.G"][1] is True


def test_generic_container(tmp_path):
    path = tmp_path / "c.bin"
    arrays = [("a", np.arange(6.0).reshape(2, 3), True), ("s", np.array(2.5), False)]
    write_container(path, {"k": [1, 2]}, arrays)
    header, back = read_container(path)
    assert header == {"k": [1, 2]}
    assert np.array_equal(back["a"][0], arrays[0][1]) and back["s"][0] == 2.5


def test_config_mismatch(saved):
    with pytest.raises(ModelFormatError, match="use_pos"):
        load_model(saved, {"use_pos": False})
    with pytest.raises(ModelFormatError, match="hidden_dim"):
        load_model(saved, ModelConfig(hidden_dim=7))
    assert load_model(saved, CFG).config == CFG


@pytest.mark.parametrize("cut", [4, 20, 200, -3])
def test_truncated(saved, cut):
    data = saved.read_bytes()
    saved.write_bytes(data[:cut])
    with pytest.raises(ModelFormatError):
        load_model(saved)


def test_bad_magic_and_version(saved):
    data = saved.read_bytes()
    saved.write_bytes(b"NOTAMODL" + data[8:])
    with pytest.raises(ModelFormatError):
        load_model(saved)
    saved.write_bytes(data[:8] + struct.pack("<I", 9) + data[12:])
    with pytest.raises(ModelFormatError, match="version"):
        load_model(saved)


def test_trailing_bytes(saved):
    saved.write_bytes(saved.read_bytes() + b"\0")
    with pytest.raises(ModelFormatError):
        load_model(saved)


def test_parameter_set_mismatch(model, tmp_path):
    path = tmp_path / "x.bin"
    header = {"config": CFG.to_dict(), "vocab": model.vocab.to_dict(),
              "pretrained_words": model.pretrained_words}
    arrays = [(p.name, p.value, p.trainable) for p in model.store if p.name != "out.q"]
    write_container(path, header, arrays)
    with pytest.raises(ModelFormatError, match="out.q"):
        load_model(path)
