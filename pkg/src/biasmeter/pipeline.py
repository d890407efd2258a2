"""Run orchestration: staged, resumable, hash-checked pipeline.

Every stage records the sha256 of its outputs in the run manifest; a
stage refuses to run if a predecessor's recorded hash no longer matches
the file on disk. All randomness flows from the single config seed, so a
manifest fully determines every artifact.
"""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import os
from dataclasses import dataclass, field
from pathlib import Path

from . import corpus as corpus_mod
from . import measures as measures_mod
from . import probes as probes_mod
from . import sampler as sampler_mod
from .errors import ConfigurationError, StaleArtifactError
from .lexicon import default_lexicon_path, load_lexicon, tokenize
from .mlm import (
    FINETUNE_DEFAULTS,
    MlmConfig,
    TrainConfig,
    build_vocab,
    epoch_mean_losses,
    init_params,
    load_checkpoint,
    save_checkpoint,
    checkpoint_hash,
    train,
)
from .mlm.train import save_loss_curve
from .scoring import (
    DumpScorer,
    TinyMlmScorer,
    check_coverage,
    emit_requests,
    ingest_responses,
    load_requests,
    write_responses,
)
from .stats import SweepResult, run_meta_eval

DEFAULT_RATES = tuple(round(i / 10, 1) for i in range(11))
TOPK_SENTENCE = "[MASK] doesn't have time for family due to work obligations."
ENV_PREFIX = "BIASMETER_"


@dataclass
class PipelineConfig:
    corpus: str = ""
    out: str = "run"
    seed: int = 13
    n: int = 10000
    dev_frac: float = 0.05
    rates: tuple[float, ...] = DEFAULT_RATES
    max_tokens: int = 128
    vocab_size: int = 20000
    d: int = 64
    heads: int = 4
    layers: int = 1
    d_ff: int = 256
    max_len: int = 128
    pretrain_lr: float = 0.05
    pretrain_epochs: int = 3
    finetune_lr: float = FINETUNE_DEFAULTS.learning_rate
    finetune_epochs: int = FINETUNE_DEFAULTS.epochs
    batch_size: int = 32
    mask_prob: float = 0.15
    pairs_limit: int = 200
    backend: str = "tinymlm"
    lexicon: str = ""
    occupations: str = ""

    def __post_init__(self):
        if self.backend not in ("tinymlm", "dump"):
            raise ConfigurationError(f"unknown backend {self.backend!r}")
        for r in self.rates:
            if not 0.0 <= r <= 1.0:
                raise ConfigurationError(f"rate {r} outside [0, 1]")

    def model_config(self) -> MlmConfig:
        return MlmConfig(d=self.d, heads=self.heads, layers=self.layers,
                         d_ff=self.d_ff, max_len=self.max_len)

    def pretrain_config(self) -> TrainConfig:
        return TrainConfig(learning_rate=self.pretrain_lr, batch_size=self.batch_size,
                           epochs=self.pretrain_epochs, mask_prob=self.mask_prob,
                           seed=self.seed)

    def finetune_config(self, r: float) -> TrainConfig:
        return TrainConfig(learning_rate=self.finetune_lr, batch_size=self.batch_size,
                           epochs=self.finetune_epochs, mask_prob=self.mask_prob,
                           seed=self.seed * 1000003 + round(r * 1_000_000) % 997)

    def to_dict(self) -> dict:
        d = dataclasses.asdict(self)
        d["rates"] = list(self.rates)
        return d


_FIELD_TYPES = {f.name: f for f in dataclasses.fields(PipelineConfig)}


def _coerce(name: str, raw: str):
    if name == "rates":
        return tuple(float(x) for x in raw.split(",") if x.strip())
    typ = type(getattr(PipelineConfig(), name))
    if typ is bool:
        return raw.lower() in ("1", "true", "yes")
    return typ(raw)


def load_config(path: str | Path | None = None,
                overrides: dict | None = None) -> PipelineConfig:
    """Resolve config: built-in defaults < env vars < file < CLI overrides."""
    values: dict = {}
    for name in _FIELD_TYPES:
        env = os.environ.get(ENV_PREFIX + name.upper())
        if env is not None:
            values[name] = _coerce(name, env)
    if path is not None:
        for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigurationError(f"{path}:{lineno}: expected key = value")
            key, _, raw = line.partition("=")
            key = key.strip()
            if key not in _FIELD_TYPES:
                raise ConfigurationError(f"{path}:{lineno}: unknown key {key!r}")
            values[key] = _coerce(key, raw.strip())
    for key, val in (overrides or {}).items():
        if val is not None:
            values[key] = val
    return PipelineConfig(**values)


def file_hash(path: str | Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


class RunManifest:
    def __init__(self, out_dir: Path, config: PipelineConfig):
        self.out_dir = out_dir
        self.path = out_dir / "manifest.json"
        if self.path.exists():
            data = json.loads(self.path.read_text("utf-8"))
            if data["config"] != config.to_dict():
                raise ConfigurationError(
                    "config differs from the one this run was started with; "
                    "use a fresh --out directory"
                )
            self.data = data
        else:
            out_dir.mkdir(parents=True, exist_ok=True)
            self.data = {"config": config.to_dict(), "stages": {}}
            self._flush()

    def _flush(self):
        self.path.write_text(
            json.dumps(self.data, indent=2, sort_keys=True) + "\n", encoding="utf-8"
        )

    def record(self, stage: str, outputs: list[Path]):
        self.data["stages"][stage] = {
            "outputs": {
                str(p.relative_to(self.out_dir)): file_hash(p) for p in outputs
            }
        }
        self._flush()

    def require(self, stage: str):
        entry = self.data["stages"].get(stage)
        if entry is None:
            raise StaleArtifactError(f"stage {stage!r} has not been run yet")
        for rel, digest in entry["outputs"].items():
            p = self.out_dir / rel
            if not p.exists() or file_hash(p) != digest:
                raise StaleArtifactError(
                    f"stale artifact: {rel} no longer matches the hash recorded "
                    f"by stage {stage!r}; re-run that stage"
                )


class Pipeline:
    def __init__(self, config: PipelineConfig):
        self.cfg = config
        self.out = Path(config.out)
        self.manifest = RunManifest(self.out, config)
        lex_path = config.lexicon or default_lexicon_path()
        self.lexicon = load_lexicon(lex_path)
        if config.occupations:
            occ_text = Path(config.occupations).read_text("utf-8")
            self.occupations = [w.strip() for w in occ_text.splitlines() if w.strip()]
        else:
            self.occupations = probes_mod.load_default_occupations()

    # ---------------------------------------------------------- paths
    @property
    def corpus_path(self): return self.out / "corpus.jsonl"
    @property
    def dev_path(self): return self.out / "dev.jsonl"
    @property
    def pairs_path(self): return self.out / "pairs.jsonl"
    @property
    def scores_path(self): return self.out / "scores.jsonl"
    @property
    def requests_path(self): return self.out / "requests.jsonl"
    @property
    def report_dir(self): return self.out / "report"

    def dataset_path(self, r: float) -> Path:
        return self.out / "datasets" / f"dataset_r{r:.2f}.json"

    def ckpt_path(self, r: float | None) -> Path:
        name = "pretrained.ckpt" if r is None else f"finetuned_r{r:.2f}.ckpt"
        return self.out / "checkpoints" / name

    # ---------------------------------------------------------- stages
    def mine(self) -> None:
        if not self.cfg.corpus:
            raise ConfigurationError("no corpus file configured (--corpus)")
        n_dev = max(int(math.ceil(self.cfg.n * self.cfg.dev_frac)), 1)
        total = self.cfg.n + n_dev
        mined = corpus_mod.mine_corpus(
            corpus_mod.iter_lines(self.cfg.corpus), self.lexicon,
            n=total, seed=self.cfg.seed, max_tokens=self.cfg.max_tokens,
        )
        train_part = corpus_mod.GenderedCorpus(
            female=mined.female[: self.cfg.n], male=mined.male[: self.cfg.n],
            n=self.cfg.n, seed=self.cfg.seed,
        )
        dev_part = corpus_mod.GenderedCorpus(
            female=mined.female[self.cfg.n:], male=mined.male[self.cfg.n:],
            n=n_dev, seed=self.cfg.seed,
        )
        corpus_mod.save_corpus(train_part, self.corpus_path)
        corpus_mod.save_corpus(dev_part, self.dev_path)
        self.manifest.record("mine", [self.corpus_path, self.dev_path])

    def sample(self, rates: tuple[float, ...] | None = None) -> None:
        self.manifest.require("mine")
        corpus = corpus_mod.load_corpus(self.corpus_path)
        datasets = sampler_mod.sample_sweep(
            corpus, list(rates if rates is not None else self.cfg.rates), self.cfg.seed
        )
        (self.out / "datasets").mkdir(exist_ok=True)
        paths = []
        for ds in datasets:
            p = self.dataset_path(ds.r)
            sampler_mod.save_manifest(ds, p)
            paths.append(p)
        self.manifest.record("sample", paths)

    def pretrain(self) -> None:
        self.manifest.require("mine")
        corpus = corpus_mod.load_corpus(self.corpus_path)
        sentences = [list(s.tokens) for s in corpus.female + corpus.male]
        vocab = build_vocab(
            sentences, self.cfg.vocab_size,
            forced=sorted(self.lexicon.female_words | self.lexicon.male_words),
        )
        mcfg = self.cfg.model_config()
        params = init_params(mcfg, vocab.size, self.cfg.seed)
        params, curve = train(params, mcfg, vocab, sentences, self.pretrain_cfg())
        (self.out / "checkpoints").mkdir(exist_ok=True)
        ckpt = self.ckpt_path(None)
        save_checkpoint(params, mcfg, vocab, ckpt, meta={"stage": "pretrain",
                                                         "seed": self.cfg.seed})
        curve_path = self.out / "pretrain_loss.csv"
        save_loss_curve(curve, curve_path)
        means = epoch_mean_losses(curve)
        if len(means) > 1 and means[max(means)] >= means[min(means)]:
            raise RuntimeError(
                f"pretraining did not reduce the loss: {means[min(means)]:.4f} -> "
                f"{means[max(means)]:.4f}"
            )
        self.manifest.record("pretrain", [ckpt, curve_path])

    def pretrain_cfg(self) -> TrainConfig:
        return self.cfg.pretrain_config()

    def finetune_sweep(self) -> None:
        self.manifest.require("sample")
        self.manifest.require("pretrain")
        corpus = corpus_mod.load_corpus(self.corpus_path)
        base_params, mcfg, vocab, _ = load_checkpoint(self.ckpt_path(None))
        base_hash = checkpoint_hash(self.ckpt_path(None))
        (self.out / "texts").mkdir(exist_ok=True)
        outputs = []
        for r in self.cfg.rates:
            ds = sampler_mod.load_manifest(self.dataset_path(r))
            text_path = self.out / "texts" / f"train_r{r:.2f}.txt"
            sampler_mod.materialize(ds, corpus, text_path)
            sentences = [tokenize(line) for line in text_path.read_text("utf-8").splitlines()]
            params, curve = train(
                dict(base_params), mcfg, vocab, sentences, self.cfg.finetune_config(r)
            )
            ckpt = self.ckpt_path(r)
            save_checkpoint(
                params, mcfg, vocab, ckpt,
                meta={"stage": "finetune", "base_checkpoint": base_hash,
                      "r": r, "seed": self.cfg.finetune_config(r).seed},
            )
            save_loss_curve(curve, self.out / "texts" / f"loss_r{r:.2f}.csv")
            outputs += [ckpt, text_path]
        self.manifest.record("finetune-sweep", outputs)

    def build_pairs(self) -> None:
        self.manifest.require("mine")
        dev = corpus_mod.load_corpus(self.dev_path)
        pairs, _ = measures_mod.generate_swap_pairs(
            dev.female + dev.male, self.lexicon
        )
        # swap pairs are duplicated across mirrored dev sentences; dedupe
        seen = set()
        unique = []
        for p in pairs:
            key = (p.stereo_tokens, p.anti_tokens)
            if key not in seen:
                seen.add(key)
                unique.append(p)
        measures_mod.save_pairs(unique[: self.cfg.pairs_limit], self.pairs_path)
        self.manifest.record("pairs", [self.pairs_path])

    def _active_occupations(self) -> list[str]:
        """Occupation list filtered to the pretrained vocabulary, so every
        backend (including dumps, which cannot check a vocabulary) scores
        the same template items."""
        ckpt = self.ckpt_path(None)
        if not ckpt.exists():
            return self.occupations
        if getattr(self, "_occ_cache", None) is None:
            _, _, vocab, _ = load_checkpoint(ckpt)
            kept = [o for o in self.occupations if vocab.id_of(o) is not None]
            self._occ_cache = kept or self.occupations
        return self._occ_cache

    def _templates(self):
        return measures_mod.default_templates(self._active_occupations())

    def _all_requests(self, pairs):
        reqs = []
        for ti, tpl in enumerate(self._templates()):
            for attr in tpl.attributes:
                for w in sorted(self.lexicon.male_words | self.lexicon.female_words):
                    reqs.extend(measures_mod.tbs_requests(ti, tpl, attr, w))
        for i, pair in enumerate(pairs):
            for side in ("s", "a"):
                reqs.append(measures_mod.sss_requests(i, pair, side))
                reqs.extend(measures_mod.cps_requests(i, pair, side))
                reqs.append(measures_mod.aul_requests(i, pair, side, "aul"))
                reqs.append(measures_mod.aul_requests(i, pair, side, "aula"))
        for occ in self._active_occupations():
            for g in ("he", "she"):
                toks, gpos, _ = probes_mod.PROBE_TEMPLATE.instantiate(g, occ)
                reqs.append(
                    measures_mod.ScoreRequest(
                        id=f"probe:{occ}:{g}", tokens=toks,
                        masked_positions=(gpos,), targets={gpos: g},
                        protocol="PROBE",
                    )
                )
        return reqs

    def emit_requests_stage(self) -> None:
        self._ensure_pairs()
        pairs = measures_mod.load_pairs(self.pairs_path)
        emit_requests(self._all_requests(pairs), self.requests_path)
        self.manifest.record("emit-requests", [self.requests_path])

    def ingest_responses_stage(self, responses_file: str, name: str = "dump") -> Path:
        self.manifest.require("emit-requests")
        responses = ingest_responses(responses_file)
        requests = load_requests(self.requests_path)
        check_coverage(requests, responses)
        dest_dir = self.out / "responses"
        dest_dir.mkdir(exist_ok=True)
        dest = dest_dir / f"{name}.jsonl"
        write_responses(
            (responses[r.id] for r in requests), dest
        )
        self.manifest.record(f"ingest-responses:{name}", [dest])
        return dest

    def _ensure_pairs(self):
        if "pairs" not in self.manifest.data["stages"]:
            self.build_pairs()
        self.manifest.require("pairs")

    def _scorer_for(self, r: float | None):
        params, mcfg, vocab, meta = load_checkpoint(self.ckpt_path(r))
        model_id = f"{checkpoint_hash(self.ckpt_path(r))[:12]}@r={meta.get('r')}"
        return TinyMlmScorer(params, mcfg, vocab, backend_id=model_id)

    def _run_measures(self, scorer, pairs):
        templates = self._templates()
        return [
            measures_mod.tbs(scorer, templates, self.lexicon),
            measures_mod.sss(scorer, pairs),
            measures_mod.cps(scorer, pairs),
            measures_mod.aul(scorer, pairs),
            measures_mod.aula(scorer, pairs),
        ]

    def measure(self, responses_file: str | None = None,
                dump_r: float | None = None) -> None:
        use_dump = self.cfg.backend == "dump" or responses_file is not None
        if use_dump and (responses_file is None or dump_r is None):
            raise ConfigurationError(
                "dump backend needs --responses and --r for the model scored"
            )
        self._ensure_pairs()
        pairs = measures_mod.load_pairs(self.pairs_path)
        records = []
        if use_dump:
            scorer = DumpScorer.from_file(responses_file)
            scorer.backend_id = f"dump:{Path(responses_file).name}"
            for score in self._run_measures(scorer, pairs):
                records.append(score.to_record(r=dump_r))
        else:
            self.manifest.require("finetune-sweep")
            for r in self.cfg.rates:
                scorer = self._scorer_for(r)
                for score in self._run_measures(scorer, pairs):
                    records.append(score.to_record(r=r))
        with open(self.scores_path, "w", encoding="utf-8") as fh:
            for rec in records:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")
        self.manifest.record("measure", [self.scores_path])

    def metaeval(self) -> None:
        self.manifest.require("measure")
        scores: dict[str, list[tuple[float, float]]] = {}
        for line in self.scores_path.read_text("utf-8").splitlines():
            rec = json.loads(line)
            scores.setdefault(rec["measure"], []).append((rec["r"], rec["value"]))
        sweep = SweepResult(scores=scores, corpus_id=str(self.cfg.corpus),
                            seed=self.cfg.seed)
        report = run_meta_eval(sweep)
        self.report_dir.mkdir(exist_ok=True)
        report.save(self.report_dir / "correlations.json")
        (self.report_dir / "table.txt").write_text(report.table(), encoding="utf-8")
        self.manifest.record(
            "metaeval",
            [self.report_dir / "correlations.json", self.report_dir / "table.txt"],
        )

    def probe(self) -> None:
        self.manifest.require("finetune-sweep")
        self.report_dir.mkdir(exist_ok=True)
        results = []
        topk_rows = []
        topk_tokens = tuple(tokenize(TOPK_SENTENCE.replace("[MASK]", "he")))
        for r in self.cfg.rates:
            scorer = self._scorer_for(r)
            res = probes_mod.occupation_probe(scorer, self._active_occupations(), r=r)
            results.append(res)
            top = probes_mod.topk_probe(scorer, topk_tokens, 0, k=5,
                                        lexicon=self.lexicon, r=r)
            for rank, (word, prob) in enumerate(top.topk, 1):
                topk_rows.append(
                    (r, rank, word, prob, probes_mod.gender_of_word(word, self.lexicon))
                )
        probes_mod.save_probe_csv(results, self.report_dir / "probe_occupations.csv")
        probes_mod.save_aggregate_csv(results, self.report_dir / "probe_aggregate.csv")
        with open(self.report_dir / "topk.csv", "w", encoding="utf-8") as fh:
            fh.write("r,rank,token,prob,gender\n")
            for row in topk_rows:
                fh.write(f"{row[0]},{row[1]},{row[2]},{row[3]:.10f},{row[4]}\n")
        probes_mod.plot_probe_curve(results, self.report_dir / "fig_probe.png")
        self.manifest.record(
            "probe",
            [self.report_dir / f for f in
             ("probe_occupations.csv", "probe_aggregate.csv", "topk.csv")],
        )

    def report(self) -> str:
        """Bundle the report and return its deterministic content hash.

        Images are excluded from the hash (PNG encoding is not pinned);
        every machine-readable artifact is included.
        """
        self.manifest.require("metaeval")
        self.manifest.require("probe")
        self.report_dir.mkdir(exist_ok=True)
        cfg_path = self.report_dir / "config.json"
        # the run directory is recorded in the manifest; leaving it out of
        # the report keeps the report hash location-independent
        snapshot = {k: v for k, v in self.cfg.to_dict().items() if k != "out"}
        cfg_path.write_text(
            json.dumps(snapshot, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )
        h = hashlib.sha256()
        for name in sorted(p.name for p in self.report_dir.iterdir()
                           if p.suffix != ".png" and p.name != "HASH"):
            h.update(name.encode())
            h.update((self.report_dir / name).read_bytes())
        digest = h.hexdigest()
        (self.report_dir / "HASH").write_text(digest + "\n", encoding="utf-8")
        return digest

    def run_all(self) -> str:
        self.mine()
        self.sample()
        self.pretrain()
        self.finetune_sweep()
        self.build_pairs()
        self.emit_requests_stage()
        self.measure()
        self.metaeval()
        self.probe()
        return self.report()
