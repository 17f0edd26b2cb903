import math

import pytest

import pilotmix


def test_default_config_round_trip():
    cfg = pilotmix.default_config()
    assert cfg["n_pilots"] == 128
    assert pilotmix.validate_config(cfg) == cfg


def test_bad_config_raises():
    with pytest.raises(pilotmix.ConfigError):
        pilotmix.validate_config({"n_pilots": 100})
    with pytest.raises(ValueError):
        pilotmix.validate_config({"no_such_field": 1})


def test_crc_check_value():
    bits = [int(b) for ch in b"123456789" for b in format(ch, "08b")]
    assert pilotmix.crc16(bits) == 0x29B1


def test_codec_round_trip_and_correction():
    info = pilotmix.information_bits(7, 1)
    assert len(info) == 421
    code = pilotmix.bch_encode(info)
    assert len(code) == 511
    for i in range(0, 500, 50):
        code[i] ^= 1
    assert pilotmix.bch_decode(code) == info
    symbols = pilotmix.modulate(info)
    assert len(symbols) == 256
    assert pilotmix.validate(symbols) == info


def test_choices_are_a_function_of_the_payload():
    cfg = pilotmix.default_config()
    info = pilotmix.information_bits(3, 9)
    a = pilotmix.derive_choices(info, cfg)
    assert a == pilotmix.derive_choices(info, cfg)
    assert a["user_id"] == 3
    assert len(a["slots"]) == 2
    assert all(len(s) == 2 for s in a["pilots"])


def test_bounds():
    assert math.isclose(pilotmix.collision_bound(128, 62, 2, 1, 1800), 5.657562721773529e-05,
                        rel_tol=1e-9)
    assert math.isclose(pilotmix.plr_slotted_nosic({2: 1.0}, 4, 2), 0.25)
    assert math.isclose(pilotmix.enumerate_slot_loss(4, {2: 1.0}, 2), 1 / 6)
    assert 5e-4 < pilotmix.plr_framed_nosic({2: 1.0}, {2: 1.0}, 62, 128, 400) < 2e-3


def test_peel_grid():
    chain = "grid 1 4\n1 0 0,1\n2 0 1,2\n3 0 2,3\n"
    assert pilotmix.peel_grid(chain, "NoSic") == {1, 3}
    assert pilotmix.peel_grid(chain, "InnerOnly") == {1, 2, 3}


def test_sweep_is_deterministic_across_workers():
    cfg = dict(pilotmix.default_config(), n_slots=10, n_pilots=8)
    rows1 = pilotmix.run_sweep(cfg, "k_a=10:30:10", trials=50, seed=4, workers=1)
    rows2 = pilotmix.run_sweep(cfg, "k_a=10:30:10", trials=50, seed=4, workers=3)
    strip = lambda rows: [{k: v for k, v in r.items() if k != "wall_time_s"} for r in rows]
    assert strip(rows1) == strip(rows2)
    assert [r["swept_value"] for r in rows1] == [10, 20, 30]
    csv = pilotmix.sweep_csv(cfg, "k_a=10:10:1", trials=5)
    assert csv.splitlines()[0].startswith("engine,mode,N_s,N_P,M")


def test_phy_trial():
    cfg = dict(pilotmix.default_config(), n_slots=4, n_pilots=16, n_antennas=32)
    lost, resolved = pilotmix.run_trial(cfg, 3, 11, engine="Phy")
    assert lost + resolved == 3


def test_verify():
    results = pilotmix.verify()
    assert results and all(r[2] for r in results)
