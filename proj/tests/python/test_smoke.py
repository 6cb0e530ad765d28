import csv
import json

import pytest

import currmask as cm


def tiny_config(root, method="currmask"):
    return {
        "run": {"run_id": "py_" + method, "output_dir": str(root / method), "method": method, "seed": 3},
        "data": {
            "train": {"path": str(root / "data/train"), "episodes": 6, "episode_len": 40, "seed": 0},
            "validation": {"path": str(root / "data/validation"), "episodes": 4, "episode_len": 130, "seed": 1000},
        },
        "pool": {"blocks": [1, 2, 3, 4]},
        "net": {"hidden": 16, "encoder_layers": 1, "ffn_multiplier": 2, "context_tokens": 16},
        "train": {"steps": 40, "batch_size": 4, "checkpoint_every": 20},
        "scheduler": {"interval": 20, "eval_samples": 2},
        "metrics": {"record_wallclock": False},
        "eval": {
            "prompting": {"seeds": 1, "episodes": 2, "prompt_len": 4, "rollout": 20},
            "planning": {"seeds": 1, "episodes": 2},
        },
    }


def test_block_mask_hand_trace():
    flags = cm.block_mask(8, 0.5, 2, cm.Rng(13))
    assert [i for i, v in enumerate(flags) if not v] == [1, 3, 5, 7]


def test_mask_counts():
    for length in (2, 7, 32):
        for ratio in (0.15, 0.5, 0.95):
            want = cm.masked_token_count(length, ratio)
            rng = cm.Rng(1)
            flags = cm.random_mask(length, ratio, rng)
            assert len(flags) - sum(flags) == want
            assert length - sum(cm.block_mask(length, ratio, 1, rng)) == want
    with pytest.raises(cm.ParameterError):
        cm.block_mask(4, 0.5, 5, cm.Rng(0))


def test_exp3_update():
    bandit = cm.Exp3(4, 0.2, 0.1)
    assert bandit.sampling_distribution() == pytest.approx([0.25] * 4)
    bandit.update_weights(2, 1.0)
    assert bandit.log_weights[2] == pytest.approx(0.1 / (0.25 * 4))
    assert sum(bandit.sampling_distribution()) == pytest.approx(1.0)
    with pytest.raises(cm.ContractError):
        bandit.update_weights(0, 1.5)


def test_reward_scaling():
    history = [0.0, 1.0, 2.0, 3.0, 4.0]
    assert cm.nearest_rank_percentile(history, 20) == 0.0
    assert cm.nearest_rank_percentile(history, 80) == 3.0
    assert cm.scale_reward(history, 1.5) == pytest.approx(0.0)
    assert cm.scale_reward([0.3], 7.0) == 1.0


def test_synthetic_learner():
    learner = cm.SyntheticLearner([1.0, 2.0], [0.1, 0.0], [[0.5, 0.0], [0.0, 0.0]])
    learner.train(0, 2)
    assert learner.loss(0) == pytest.approx(1.0 * 2.718281828459045 ** -1.0 + 0.1)
    assert learner.counts == [2, 0]


def test_config_defaults_and_errors(tmp_path):
    eff = cm.effective_config(tiny_config(tmp_path))
    assert eff["scheduler"]["epsilon"] == 0.2
    assert len(cm.config_hash(tiny_config(tmp_path))) == 16
    with pytest.raises(cm.ConfigError):
        cm.effective_config({"run": {"bogus": 1}})
    with pytest.raises(cm.ConfigError):
        cm.effective_config("{not json")


def test_pretrain_eval_round_trip(tmp_path):
    cfg = tiny_config(tmp_path)
    cm.gen_data(cfg)
    result = cm.pretrain(cfg)
    assert result["completed"] and result["steps_done"] == 40
    assert [r["step"] for r in result["records"]] == [20, 40]
    assert all(abs(sum(r["probabilities"]) - 1.0) < 1e-9 for r in result["records"])

    with open(tmp_path / "currmask" / "metrics.csv", newline="") as f:
        rows = list(csv.DictReader(line for line in f if not line.startswith("#")))
    assert [int(r["step"]) for r in rows] == [20, 40]
    with open(tmp_path / "currmask" / "metrics.jsonl") as f:
        lines = [json.loads(line) for line in f]
    assert lines[-1]["step"] == 40

    rows = cm.evaluate(cfg)
    assert rows[0]["task"] == "skill_prompting"
    assert rows[-1]["metric"] == "distance_mean"
    oracle = cm.evaluate(cfg, replay_oracle=True)
    assert oracle[-1]["mean"] == 0.0
    assert "distance_t20" in cm.format_report([tmp_path / "currmask" / "eval.csv"])

    with pytest.raises(cm.ConfigError):
        cm.pretrain(cfg)


def test_rerun_is_bit_identical(tmp_path):
    cfg = tiny_config(tmp_path, "maskdp")
    cm.gen_data(cfg)
    cm.pretrain(cfg)
    first = (tmp_path / "maskdp" / "checkpoint" / "params.bin").read_bytes()
    cm.pretrain(cfg, force=True)
    assert (tmp_path / "maskdp" / "checkpoint" / "params.bin").read_bytes() == first
