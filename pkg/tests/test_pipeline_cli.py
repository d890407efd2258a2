import json

import pytest

from biasmeter.cli import main
from biasmeter.errors import UnknownTokenError
from biasmeter.mlm import load_checkpoint
from biasmeter.pipeline import Pipeline, PipelineConfig, load_config
from biasmeter.scoring import (
    ScoreResponse,
    TinyMlmScorer,
    load_requests,
    write_responses,
)

OCCUPATIONS = ["doctor", "teacher", "singer", "pilot", "farmer", "student"]

MINI_CONFIG = """
seed = 11
n = 80
dev_frac = 0.2
rates = 0.0,0.5,1.0
d = 16
heads = 2
layers = 1
d_ff = 32
max_len = 32
vocab_size = 300
pretrain_epochs = 3
finetune_epochs = 1
batch_size = 16
pairs_limit = 30
"""


# ------------------------------------------------------------ usage errors

def test_rate_outside_unit_interval_is_usage_error(tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["sample", "--r", "1.5", "--out", str(tmp_path / "run")])
    assert exc.value.code == 2


def test_unknown_flag_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main(["mine", "--no-such-flag"])
    assert exc.value.code == 2


def test_missing_subcommand_is_usage_error():
    with pytest.raises(SystemExit) as exc:
        main([])
    assert exc.value.code == 2


def test_mine_without_corpus_fails(tmp_path, capsys):
    assert main(["mine", "--out", str(tmp_path / "run")]) == 1
    assert "corpus" in capsys.readouterr().err


def test_measure_dump_backend_needs_responses(tmp_path, capsys):
    assert main(["measure", "--backend", "dump",
                 "--out", str(tmp_path / "run")]) == 1
    assert "--responses" in capsys.readouterr().err


def test_stage_before_prerequisite_fails(tmp_path, capsys):
    assert main(["pretrain", "--out", str(tmp_path / "run")]) == 1
    assert "mine" in capsys.readouterr().err


# ------------------------------------------------------------ configuration

def test_config_precedence(tmp_path, monkeypatch):
    cfg_file = tmp_path / "cfg.txt"
    cfg_file.write_text("n = 300\nseed = 5\n")
    monkeypatch.setenv("BIASMETER_N", "200")
    monkeypatch.setenv("BIASMETER_D", "48")
    # defaults < env < file < CLI overrides
    cfg = load_config(cfg_file, {"seed": 9})
    assert cfg.d == 48       # env beats default
    assert cfg.n == 300      # file beats env
    assert cfg.seed == 9     # override beats file
    monkeypatch.delenv("BIASMETER_N")
    monkeypatch.delenv("BIASMETER_D")
    assert load_config().n == PipelineConfig().n


def test_config_unknown_key_rejected(tmp_path):
    cfg_file = tmp_path / "cfg.txt"
    cfg_file.write_text("no_such_knob = 3\n")
    with pytest.raises(Exception, match="no_such_knob"):
        load_config(cfg_file)


def test_config_rates_validated():
    with pytest.raises(Exception, match="outside"):
        PipelineConfig(rates=(0.0, 1.5))


def test_changed_config_on_existing_run_rejected(tmp_path, capsys):
    out = tmp_path / "run"
    Pipeline(PipelineConfig(out=str(out), seed=1))
    assert main(["pretrain", "--out", str(out), "--seed", "2"]) == 1
    assert "fresh --out" in capsys.readouterr().err


# ------------------------------------------------------------ mini sweep run

@pytest.fixture(scope="module")
def mini_run(tmp_path_factory):
    root = tmp_path_factory.mktemp("mini")
    demo = root / "demo.txt"
    occs = root / "occupations.txt"
    occs.write_text("\n".join(OCCUPATIONS) + "\n")
    cfg = root / "cfg.txt"
    out = root / "run"
    assert main(["make-demo-corpus", "--lines", "700", "--seed", "7",
                 "--path", str(demo)]) == 0
    cfg.write_text(
        MINI_CONFIG
        + f"corpus = {demo}\nout = {out}\noccupations = {occs}\n"
    )
    assert main(["run-all", "--config", str(cfg)]) == 0
    return cfg, out


def test_run_all_artifacts_present(mini_run):
    _, out = mini_run
    for name in ("corpus.jsonl", "dev.jsonl", "pairs.jsonl", "scores.jsonl",
                 "requests.jsonl", "manifest.json"):
        assert (out / name).exists(), name
    report = out / "report"
    for name in ("HASH", "correlations.json", "table.txt", "config.json",
                 "probe_occupations.csv", "probe_aggregate.csv", "topk.csv",
                 "fig_probe.png"):
        assert (report / name).exists(), name
    assert not (report / "config.json").read_text().count('"out"')


def test_scores_cover_every_rate_and_measure(mini_run):
    _, out = mini_run
    recs = [json.loads(l) for l in
            (out / "scores.jsonl").read_text().splitlines()]
    cells = {(rec["measure"], rec["r"]) for rec in recs}
    assert cells == {(m, r) for m in ("tbs", "sss", "cps", "aul", "aula")
                     for r in (0.0, 0.5, 1.0)}
    for rec in recs:
        if rec["measure"] != "tbs":
            assert 0.0 <= rec["value"] <= 1.0


def test_report_and_metaeval_idempotent(mini_run):
    cfg, out = mini_run
    corr = (out / "report" / "correlations.json").read_bytes()
    digest = (out / "report" / "HASH").read_text()
    assert main(["metaeval", "--config", str(cfg)]) == 0
    assert main(["report", "--config", str(cfg)]) == 0
    assert (out / "report" / "correlations.json").read_bytes() == corr
    assert (out / "report" / "HASH").read_text() == digest


def test_stale_artifact_detected(mini_run, capsys):
    cfg, out = mini_run
    corpus = out / "corpus.jsonl"
    original = corpus.read_bytes()
    try:
        corpus.write_bytes(original + b'{"tampered": true}\n')
        assert main(["sample", "--config", str(cfg)]) == 1
        assert "stale" in capsys.readouterr().err
    finally:
        corpus.write_bytes(original)
    assert main(["sample", "--config", str(cfg)]) == 0


def test_dump_backend_reproduces_direct_measures(mini_run):
    cfg, out = mini_run
    direct = {}
    for line in (out / "scores.jsonl").read_text().splitlines():
        rec = json.loads(line)
        if rec["r"] == 1.0:
            direct[rec["measure"]] = (rec["value"], rec["n_items"])

    # answer the emitted request file exactly as an external backend would
    params, mcfg, vocab, _ = load_checkpoint(
        out / "checkpoints" / "finetuned_r1.00.ckpt")
    scorer = TinyMlmScorer(params, mcfg, vocab, cache_size=4096)
    responses = []
    for req in load_requests(out / "requests.jsonl"):
        try:
            responses.append(scorer.score(req))
        except UnknownTokenError as exc:
            responses.append(ScoreResponse(id=req.id, logprobs={},
                                           error=str(exc)))
    dump_file = out.parent / "dump_r1.jsonl"
    write_responses(responses, dump_file)

    assert main(["ingest-responses", "--config", str(cfg),
                 "--responses", str(dump_file), "--name", "r1"]) == 0
    assert main(["measure", "--config", str(cfg),
                 "--responses", str(out / "responses" / "r1.jsonl"),
                 "--r", "1.0"]) == 0
    via_dump = {}
    for line in (out / "scores.jsonl").read_text().splitlines():
        rec = json.loads(line)
        via_dump[rec["measure"]] = (rec["value"], rec["n_items"])
    assert via_dump == direct

    # restore the sweep score file for any later stage
    assert main(["measure", "--config", str(cfg)]) == 0
    recs = [json.loads(l) for l in
            (out / "scores.jsonl").read_text().splitlines()]
    assert {rec["r"] for rec in recs} == {0.0, 0.5, 1.0}


def test_materialize_writes_dataset_text(mini_run, tmp_path):
    cfg, out = mini_run
    text_out = tmp_path / "r1.txt"
    assert main(["materialize", "--config", str(cfg),
                 "--manifest", str(out / "datasets" / "dataset_r1.00.json"),
                 "--text-out", str(text_out)]) == 0
    manifest = json.loads(
        (out / "datasets" / "dataset_r1.00.json").read_text())
    lines = text_out.read_text().splitlines()
    assert len(lines) == len(manifest["male_ids"]) + len(manifest["female_ids"])


def test_import_pairs_cli(tmp_path):
    src = tmp_path / "cp.jsonl"
    src.write_text(
        '{"sent_more": "He is a doctor.", "sent_less": "She is a doctor."}\n')
    dst = tmp_path / "pairs.jsonl"
    assert main(["import-pairs", "--input", str(src), "--output", str(dst)]) == 0
    rec = json.loads(dst.read_text())
    assert rec["stereo_text"] == "He is a doctor."
    assert rec["anti_text"] == "She is a doctor."
    from biasmeter.measures import load_pairs
    (pair,) = load_pairs(dst)
    assert pair.stereo_tokens == ("he", "is", "a", "doctor")
    assert pair.modified_stereo == (0,)
