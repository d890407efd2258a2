"""Command-line entry point.

Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import sys

from .errors import BiasmeterError
from .pipeline import PipelineConfig, Pipeline, load_config


def _rate(value: str) -> float:
    r = float(value)
    if not 0.0 <= r <= 1.0:
        raise argparse.ArgumentTypeError(f"rate of bias must be in [0, 1], got {r}")
    return r


def _rates(value: str) -> tuple[float, ...]:
    return tuple(_rate(x) for x in value.split(",") if x.strip())


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key = value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--corpus", help="raw corpus, one sentence per line")
    p.add_argument("--rates", type=_rates, help="comma-separated rates of bias")
    p.add_argument("--n", type=int, help="sentences per gender after downsampling")
    p.add_argument("--backend", choices=("tinymlm", "dump"))
    p.add_argument("--out", help="run directory")
    p.add_argument("--lexicon", help="gender lexicon file")
    p.add_argument("--occupations", help="occupation word list file")


def _pipeline(args) -> Pipeline:
    overrides = {
        k: getattr(args, k, None)
        for k in ("seed", "corpus", "rates", "n", "backend", "out",
                  "lexicon", "occupations")
    }
    cfg = load_config(args.config, overrides)
    return Pipeline(cfg)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="biasmeter",
        description="Meta-evaluate intrinsic gender-bias measures with "
                    "bias-controlled masked language models.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    for name, help_text in [
        ("mine", "mine gendered sentence sets from a raw corpus"),
        ("sample", "build bias-controlled dataset manifests for the rate sweep"),
        ("pretrain", "pretrain the built-in masked LM on the mined corpus"),
        ("finetune-sweep", "fine-tune one checkpoint per rate of bias"),
        ("pairs", "generate gender-swap evaluation pairs from the dev split"),
        ("emit-requests", "write the score-request file for external backends"),
        ("ingest-responses", "validate and store an external response file"),
        ("measure", "compute the five bias measures per checkpoint"),
        ("metaeval", "correlate measure scores with the rates of bias"),
        ("probe", "occupation and top-k probes over the sweep"),
        ("report", "bundle the report directory and write its hash"),
        ("run-all", "run every stage in order"),
    ]:
        p = sub.add_parser(name, help=help_text)
        _add_common(p)
        if name == "sample":
            p.add_argument("--r", type=_rate, help="single rate instead of the sweep")
        if name == "ingest-responses":
            p.add_argument("--responses", required=True)
            p.add_argument("--name", default="dump")
        if name == "measure":
            p.add_argument("--responses", help="response dump for --backend dump")
            p.add_argument("--r", type=_rate, help="rate of bias of the dumped model")

    p = sub.add_parser("materialize", help="write the training text for a dataset manifest")
    _add_common(p)
    p.add_argument("--manifest", required=True)
    p.add_argument("--text-out", required=True)

    p = sub.add_parser("make-demo-corpus", help="write the synthetic demo corpus")
    p.add_argument("--lines", type=int, default=2000)
    p.add_argument("--seed", type=int, default=7)
    p.add_argument("--path", required=True)

    p = sub.add_parser("import-pairs", help="convert CP-style pairs to the pair schema")
    p.add_argument("--input", required=True,
                   help="JSONL with sent_more/sent_less or stereo_text/anti_text fields")
    p.add_argument("--output", required=True)

    p = sub.add_parser("serve", help="serve a frozen checkpoint over HTTP")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)

    return parser


def run(args) -> int:
    cmd = args.command
    if cmd == "make-demo-corpus":
        from .demo import write_demo_corpus
        write_demo_corpus(args.path, args.lines, args.seed)
        return 0
    if cmd == "import-pairs":
        from .tools import import_cp_pairs
        n = import_cp_pairs(args.input, args.output)
        print(f"imported {n} pairs")
        return 0
    if cmd == "serve":
        import uvicorn
        from .mlm import load_checkpoint
        from .scoring import TinyMlmScorer
        from .service import create_app
        params, cfg, vocab, meta = load_checkpoint(args.checkpoint)
        scorer = TinyMlmScorer(params, cfg, vocab)
        uvicorn.run(create_app(scorer, meta), host=args.host, port=args.port)
        return 0

    pipe = _pipeline(args)
    if cmd == "mine":
        pipe.mine()
    elif cmd == "sample":
        single = getattr(args, "r", None)
        pipe.sample(rates=(single,) if single is not None else None)
    elif cmd == "materialize":
        from . import corpus as corpus_mod
        from . import sampler as sampler_mod
        ds = sampler_mod.load_manifest(args.manifest)
        corpus = corpus_mod.load_corpus(pipe.corpus_path)
        sampler_mod.materialize(ds, corpus, args.text_out)
    elif cmd == "pretrain":
        pipe.pretrain()
    elif cmd == "finetune-sweep":
        pipe.finetune_sweep()
    elif cmd == "pairs":
        pipe.build_pairs()
    elif cmd == "emit-requests":
        pipe.emit_requests_stage()
    elif cmd == "ingest-responses":
        pipe.ingest_responses_stage(args.responses, args.name)
    elif cmd == "measure":
        pipe.measure(responses_file=getattr(args, "responses", None),
                     dump_r=getattr(args, "r", None))
    elif cmd == "metaeval":
        pipe.metaeval()
    elif cmd == "probe":
        pipe.probe()
    elif cmd == "report":
        print(pipe.report())
    elif cmd == "run-all":
        print(pipe.run_all())
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return run(args)
    except BiasmeterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, ValueError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
