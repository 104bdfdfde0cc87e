import json

import pytest

from dialshape.cli import _seeds, build_parser, main, resolve_config


def test_seed_syntax():
    assert _seeds("0-3") == [0, 1, 2, 3]
    assert _seeds("4,7") == [4, 7]


def test_config_file_overrides_flags(tmp_path):
    cfg_path = tmp_path / "c.json"
    cfg_path.write_text(json.dumps({"budget": 30, "shaping": "oracle"}))
    args = build_parser().parse_args(["train-policy", "--budget", "999", "--shaping", "none",
                                      "--gamma", "0.9", "--config", str(cfg_path)])
    cfg = resolve_config(args)
    assert cfg.budget == 30 and cfg.shaping == "oracle" and cfg.gamma == 0.9


def test_bad_shaping_rejected():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["train-policy", "--shaping", "magic"])


def test_end_to_end_is_byte_identical(tmp_path, capsys):
    def run(d):
        d.mkdir()
        assert main(["gen-corpus", "--n", "10", "--out", str(d / "train.jsonl")]) == 0
        assert main(["gen-corpus", "--n", "10", "--seed", "1", "--out", str(d / "valid.jsonl")]) == 0
        assert main(["train-rnn", "--train", str(d / "train.jsonl"), "--valid", str(d / "valid.jsonl"),
                     "--hidden", "4", "--epochs", "2", "--out", str(d)]) == 0
        assert main(["eval-rnn", "--model", str(d / "rnn_gru.json"), "--test", f"a={d / 'valid.jsonl'}",
                     "--out", str(d / "eval.csv")]) == 0
        for shaping in ("none", "rnn"):
            assert main(["train-policy", "--shaping", shaping, "--model", str(d / "rnn_gru.json"),
                         "--seeds", "0-1", "--budget", "10", "--eval-every", "5", "--eval-n", "3",
                         "--out", str(d)]) == 0
        assert main(["report", "--out", str(d), "--window", "3"]) == 0
        return {p.name: p.read_bytes() for p in sorted(d.iterdir())}

    a, b = run(tmp_path / "a"), run(tmp_path / "b")
    assert a == b
    assert {"summary.csv", "learning_curves.csv", "rnn_gru_history.csv", "eval.csv",
            "train.csv", "policy_rnn.csv"} <= set(a)
    assert "rnn:" in capsys.readouterr().out


def test_missing_inputs_exit(tmp_path):
    with pytest.raises(SystemExit):
        main(["train-rnn", "--out", str(tmp_path)])
    assert main(["report", "--out", str(tmp_path)]) == 2
