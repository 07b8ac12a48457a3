"""Single entry point exposing every pipeline stage as a subcommand.

Exit codes: 0 success, 1 data errors, 2 usage/configuration errors.  Every
flag a subcommand reads is declared in SUBCOMMANDS, which both generates the
argparse surface and drives the config-file key validation.
"""

from __future__ import annotations

import argparse
import json
import subprocess
import sys
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import buckets as buckets_mod
from . import compute as compute_mod
from . import dedup as dedup_mod
from . import rlmath, scheduler, timesteps
from .cliconfig import ConfigError, Opt, load_config_file, resolve
from .filtering import STAGES, FilterConfig, FilterConfigError, run_pipeline
from .manifest import (
    Manifest,
    ManifestError,
    load_manifest,
    manifest_stats,
    write_manifest,
)
from .prompts import (
    FormatError,
    LLMClient,
    TransportError,
    build_promptgen_request,
    build_rubric_request,
    default_taxonomy,
    load_taxonomy,
    parse_promptgen_response,
    parse_rubrics,
    prompt_record,
    sample_item_request,
    system_prompt_search,
)
from .prompts.chat import REWRITE_MODEL, ChatError, ChatMessage, ChatRequest


class DataError(RuntimeError):
    pass


def _csv(raw: str) -> list[str]:
    return [part.strip() for part in raw.split(",") if part.strip()]


def _int_csv(raw: str) -> list[int]:
    return [int(part) for part in _csv(raw)]


SUBCOMMANDS: dict[str, list[Opt]] = {
    "stats": [
        Opt("input", str, None, "manifest to summarize"),
        Opt("out", str, None, "write the summary JSON here instead of stdout"),
    ],
    "filter": [
        Opt("input", str, None, "input manifest"),
        Opt("out", str, None, "kept-records manifest"),
        Opt("report", str, None, "per-stage count report (JSON)"),
        Opt("removed_out", str, None, "manifest of removed records with their scores"),
        Opt("images_root", str, None, "directory that record paths are relative to"),
        Opt("embeddings", str, None, "embedding store for the dedup stage"),
        Opt("stages", str, "area", "comma-separated stages to enable"),
        Opt("min_area", int, 384 * 384, "minimum pixel area kept"),
        Opt("nsfw_max", float, 0.5, "maximum allowed nsfw score"),
        Opt("aesthetic_min", float, 3.0, "minimum aesthetic score kept"),
        Opt("watermark_max", float, 0.5, "maximum allowed watermark score"),
        Opt("clarity_min", float, 100.0, "minimum Laplacian variance kept"),
        Opt("entropy_min", float, 4.0, "minimum grayscale entropy (bits) kept"),
        Opt("luminance_min", float, 0.05, "minimum mean V-channel value kept"),
        Opt("luminance_max", float, 0.98, "maximum mean V-channel value kept"),
        Opt("dup_threshold", float, 0.985, "cosine similarity above which a record is a duplicate"),
        Opt("jobs", int, 1, "parallel workers for per-record stages"),
        Opt("deterministic", None, False, "suppress timestamps in the report"),
    ],
    "dedup": [
        Opt("embeddings", str, None, "embedding store file"),
        Opt("input", str, None, "manifest whose ids map onto the store (optional)"),
        Opt("out", str, None, "decision JSON output"),
        Opt("keep_out", str, None, "write the deduplicated manifest here (needs --input)"),
        Opt("threshold", float, 0.985, "cosine similarity threshold"),
        Opt("mode", str, "exact", "exact or approx"),
        Opt("probes", int, 8, "probed centroids per query (approx mode)"),
        Opt("centroids", int, None, "centroid count (approx mode; default sqrt(n))"),
        Opt("seed", int, None, "seed for the approx index"),
        Opt("deterministic", None, False, "require an explicit --seed"),
    ],
    "bucketize": [
        Opt("list", None, False, "print the canonical 27-bucket table"),
        Opt("export", str, None, "write the table as JSON"),
        Opt("input", str, None, "manifest to assign buckets for"),
        Opt("out", str, None, "bucket assignments (line-delimited JSON)"),
        Opt("tier", str, "auto", "base tier: auto, 512, 768, or 1024"),
    ],
    "schedule": [
        Opt("input", str, None, "manifest to plan"),
        Opt("out", str, None, "plan file (line-delimited JSON)"),
        Opt("report", str, None, "imbalance report JSON"),
        Opt("world_size", int, 1, "number of ranks"),
        Opt("epoch", int, 0, "epoch index"),
        Opt("tier", str, "auto", "base tier: auto, 512, 768, or 1024"),
        Opt("mode", str, "independent", "bucket order mode: independent or synced"),
        Opt("batch_sizes", str, "24,10,6", "batch sizes for the 512/768/1024 tiers"),
        Opt("cost_exponent", float, 1.0, "token-cost exponent for the imbalance report"),
        Opt("seed", int, None, "shuffle seed"),
        Opt("jobs", int, 1, "accepted for symmetry; planning is deterministic for any value"),
        Opt("deterministic", None, False, "require an explicit --seed"),
    ],
    "sample-timesteps": [
        Opt("count", int, 10, "number of draws"),
        Opt("mu", float, None, "logit-normal location (overrides --tokens)"),
        Opt("tokens", int, None, "token count the location is interpolated for"),
        Opt("sigma", float, 1.0, "logit-normal scale"),
        Opt("seed", int, None, "sampler seed"),
        Opt("out", str, None, "write draws here instead of stdout"),
        Opt("deterministic", None, False, "require an explicit --seed"),
    ],
    "nft-eval": [
        Opt("input", str, None, "line-delimited velocity/reward tuples"),
        Opt("out", str, None, "write results here instead of stdout"),
        Opt("beta", float, 1.0, "velocity blend coefficient"),
        Opt("z_c", float, None, "reward normalizer (default: pooled std of raw rewards)"),
        Opt("kl_coeff", float, 1e-4, "drift penalty coefficient"),
    ],
    "gen-prompts": [
        Opt("taxonomy", str, None, "taxonomy JSON (default: bundled seed taxonomy)"),
        Opt("count", int, 5, "number of items to sample"),
        Opt("seed", int, None, "sampling seed"),
        Opt("out", str, None, "output records (line-delimited JSON)"),
        Opt("offline", None, False, "emit built requests instead of calling the endpoint"),
        Opt("deterministic", None, False, "require an explicit --seed"),
    ],
    "rubric-validate": [
        Opt("input", str, None, "file with one rubric payload per line"),
        Opt("out", str, None, "write verdicts here instead of stdout"),
    ],
    "prompt-search": [
        Opt("initial", str, None, "file holding the initial system prompt"),
        Opt("iterations", int, 5, "rewrite iterations"),
        Opt("evaluator_cmd", str, None,
            "command fed the candidate on stdin; prints score then failure lines"),
        Opt("rewriter_cmd", str, None,
            "command fed prompt, '---', failures on stdin; prints the rewrite "
            "(default: LLM endpoint)"),
        Opt("out", str, None, "write the best prompt here"),
        Opt("history_out", str, None, "write the score history JSON here"),
    ],
    "compute-compare": [
        Opt("budgets", str, None, "JSON array of {label, gpu_hours, peak_tflops}"),
        Opt("json", None, False, "emit JSON instead of a text table"),
    ],
}

RANDOMIZED = {"dedup", "schedule", "sample-timesteps", "gen-prompts"}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lenspipe", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")
    for name, opts in SUBCOMMANDS.items():
        p = sub.add_parser(name, help=opts[0].help if opts else "")
        p.add_argument("--config", default=None, help="INI config file (flags win)")
        for opt in opts:
            if opt.cast is None:
                p.add_argument(opt.flag, dest=opt.name, action="store_true", help=opt.help)
            else:
                p.add_argument(opt.flag, dest=opt.name, type=opt.cast, default=None, help=opt.help)
    return parser


def _effective(args: argparse.Namespace) -> dict:
    file_values = {}
    if args.config:
        file_values = load_config_file(args.config, SUBCOMMANDS)
    cli_values = {o.name: getattr(args, o.name) for o in SUBCOMMANDS[args.command]}
    opts = resolve(args.command, SUBCOMMANDS[args.command], cli_values, file_values)
    if args.command in RANDOMIZED:
        if opts.get("deterministic") and opts.get("seed") is None:
            raise ConfigError("--deterministic requires an explicit --seed")
        if opts.get("seed") is None:
            opts["seed"] = 0
    return opts


def _require(opts: dict, *names: str) -> None:
    missing = [n for n in names if opts.get(n) is None]
    if missing:
        flags = ", ".join("--" + n.replace("_", "-") for n in missing)
        raise ConfigError(f"missing required flags: {flags}")


def _write_lines(path: str | None, lines: list[str]) -> None:
    if path is None:
        for line in lines:
            print(line)
    else:
        Path(path).write_text("".join(line + "\n" for line in lines), encoding="utf-8")


def cmd_stats(opts: dict) -> int:
    _require(opts, "input")
    stats = manifest_stats(load_manifest(opts["input"]))
    _write_lines(opts["out"], [json.dumps(stats.to_obj(), separators=(",", ":"))])
    return 0


def cmd_filter(opts: dict) -> int:
    _require(opts, "input", "out")
    requested = _csv(opts["stages"])
    unknown = set(requested) - set(STAGES)
    if unknown:
        raise ConfigError(f"unknown stages {sorted(unknown)}; valid: {list(STAGES)}")
    cfg = FilterConfig(
        min_area=opts["min_area"],
        nsfw_max=opts["nsfw_max"],
        aesthetic_min=opts["aesthetic_min"],
        watermark_max=opts["watermark_max"],
        clarity_min=opts["clarity_min"],
        entropy_min=opts["entropy_min"],
        luminance_range=(opts["luminance_min"], opts["luminance_max"]),
        dup_threshold=opts["dup_threshold"],
        stage_toggles={s: s in requested for s in STAGES},
    )
    m = load_manifest(opts["input"])

    image_loader = None
    if opts["images_root"] is not None:
        root = Path(opts["images_root"])

        def image_loader(rec):
            return (root / rec.path).read_bytes()

    embeddings = None
    if opts["embeddings"] is not None:
        embeddings = dedup_mod.vectors_for_ids(opts["embeddings"], m.ids())

    removed: list = []
    kept, report = run_pipeline(
        m, cfg,
        image_loader=image_loader,
        embeddings=embeddings,
        jobs=opts["jobs"],
        removed_sink=lambda rec, stage: removed.append(rec),
    )
    write_manifest(kept, opts["out"])
    if opts["removed_out"]:
        write_manifest(removed, opts["removed_out"])
    if opts["report"]:
        obj = report.to_obj()
        if not opts["deterministic"]:
            obj["generated_at"] = datetime.now(timezone.utc).isoformat()
        Path(opts["report"]).write_text(json.dumps(obj, indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_dedup(opts: dict) -> int:
    _require(opts, "embeddings", "out")
    if opts["mode"] not in ("exact", "approx"):
        raise ConfigError(f"unknown mode {opts['mode']!r}; use exact or approx")
    if opts["keep_out"] and not opts["input"]:
        raise ConfigError("--keep-out needs --input")
    if opts["input"]:
        m = load_manifest(opts["input"])
        ids = m.ids()
        vectors = dedup_mod.vectors_for_ids(opts["embeddings"], ids)
    else:
        m = None
        hashes, vectors = dedup_mod.read_store(opts["embeddings"])
        ids = [f"{h:016x}" for h in hashes]
    if opts["mode"] == "exact":
        decision = dedup_mod.dedup_exact(ids, vectors, opts["threshold"])
    else:
        if opts["probes"] < 1:
            raise ConfigError("--probes must be >= 1")
        if opts["centroids"] is not None and opts["centroids"] < 1:
            raise ConfigError("--centroids must be >= 1")
        decision = dedup_mod.dedup_approx(
            ids, vectors, opts["threshold"],
            probes=opts["probes"], centroids=opts["centroids"], seed=opts["seed"],
        )
    Path(opts["out"]).write_text(
        json.dumps(decision.to_obj(), indent=2) + "\n", encoding="utf-8")
    if opts["keep_out"] and m is not None:
        kept = Manifest(records=[r for r in m if r.id not in decision.removed_ids])
        write_manifest(kept, opts["keep_out"])
    return 0


def cmd_bucketize(opts: dict) -> int:
    table = buckets_mod.canonical_table()
    if opts["list"]:
        for b in table.buckets:
            print(f"{b.base:>4}  {b.aspect_label():>5}  {b.width:>4} x {b.height:>4}")
        return 0
    if opts["export"]:
        buckets_mod.export_table(table, opts["export"])
        return 0
    _require(opts, "input", "out")
    m = load_manifest(opts["input"])
    lines = []
    for rec in m:
        bucket = _assign(rec, opts["tier"], table)
        lines.append(json.dumps({"id": rec.id, "bucket": bucket.to_obj()}, separators=(",", ":")))
    _write_lines(opts["out"], lines)
    return 0


def _assign(rec, tier: str, table) -> buckets_mod.Bucket:
    if tier == "auto":
        base = buckets_mod.select_tier(rec.width, rec.height, table)
    else:
        try:
            base = int(tier)
        except ValueError:
            raise ConfigError(f"bad tier {tier!r}; use auto, 512, 768, or 1024") from None
        if base not in buckets_mod.BASES:
            raise ConfigError(f"bad tier {tier!r}; use auto, 512, 768, or 1024")
    return buckets_mod.assign_bucket(rec.width, rec.height, base, table)


def cmd_schedule(opts: dict) -> int:
    _require(opts, "input", "out")
    if opts["world_size"] < 1:
        raise ConfigError("--world-size must be >= 1")
    if opts["epoch"] < 0:
        raise ConfigError("--epoch must be >= 0")
    if opts["mode"] not in ("independent", "synced"):
        raise ConfigError(f"unknown mode {opts['mode']!r}; use independent or synced")
    if opts["cost_exponent"] < 1.0:
        raise ConfigError("--cost-exponent must be >= 1")
    sizes_list = _int_csv(opts["batch_sizes"])
    if len(sizes_list) != 3 or any(s < 1 for s in sizes_list):
        raise ConfigError("--batch-sizes needs three positive values (512, 768, 1024 tiers)")
    sizes = dict(zip(buckets_mod.BASES, sizes_list))
    table = buckets_mod.canonical_table()
    m = load_manifest(opts["input"])
    bucket_of = {rec.id: _assign(rec, opts["tier"], table) for rec in m}
    per_rank_ids = scheduler.partition(m.ids(), opts["world_size"], opts["seed"], opts["epoch"])
    assignments = [[(i, bucket_of[i]) for i in rank_ids] for rank_ids in per_rank_ids]
    plan = scheduler.plan_epoch(assignments, opts["seed"], opts["epoch"],
                                batch_sizes=sizes, mode=opts["mode"])
    scheduler.write_plan(plan, opts["out"])
    if opts["report"]:
        cm = scheduler.CostModel(exponent=opts["cost_exponent"])
        rep = scheduler.imbalance_report(plan.plans, cm)
        Path(opts["report"]).write_text(json.dumps(rep.to_obj(), indent=2) + "\n", encoding="utf-8")
    return 0


def cmd_sample_timesteps(opts: dict) -> int:
    if opts["count"] < 0:
        raise ConfigError("--count must be >= 0")
    if opts["sigma"] <= 0:
        raise ConfigError("--sigma must be > 0")
    if opts["tokens"] is not None and opts["tokens"] < 1:
        raise ConfigError("--tokens must be >= 1")
    if opts["mu"] is not None:
        mu = opts["mu"]
    elif opts["tokens"] is not None:
        mu = timesteps.mu_for_tokens(opts["tokens"])
    else:
        mu = timesteps.mu_for_tokens(1024)
    params = timesteps.LogitNormalParams(mu=mu, sigma=opts["sigma"])
    rng = np.random.default_rng(opts["seed"])
    draws = timesteps.sample_t(rng, params, size=opts["count"])
    _write_lines(opts["out"], [repr(float(t)) for t in draws])
    return 0


def cmd_nft_eval(opts: dict) -> int:
    _require(opts, "input")
    if opts["beta"] <= 0:
        raise ConfigError("--beta must be > 0")
    if opts["kl_coeff"] < 0:
        raise ConfigError("--kl-coeff must be >= 0")
    if opts["z_c"] is not None and opts["z_c"] <= 0:
        raise ConfigError("--z-c must be > 0")
    rows = []
    with open(opts["input"], "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                rows.append((
                    rlmath.VelocityPair(obj["v_old"], obj["v_theta"], obj["v_target"]),
                    float(obj["raw_reward"]),
                ))
            except (json.JSONDecodeError, KeyError, TypeError, rlmath.RLMathError) as exc:
                raise DataError(f"line {line_no}: {exc}") from exc
    if not rows:
        raise DataError("no input tuples")
    raw = np.array([r for _, r in rows])
    group_mean = float(raw.mean())
    z_c = opts["z_c"] if opts["z_c"] is not None else float(raw.std())
    if z_c <= 0:
        raise DataError("raw rewards have zero spread; pass an explicit --z-c")
    out_lines = []
    for pair, raw_reward in rows:
        r = float(rlmath.normalize_reward(raw_reward, group_mean, z_c))
        out_lines.append(json.dumps({
            "reward": r,
            "nft_loss": rlmath.nft_loss(pair, r, opts["beta"]),
            "kl_penalty": rlmath.kl_penalty(pair, opts["kl_coeff"]),
        }, separators=(",", ":")))
    _write_lines(opts["out"], out_lines)
    return 0


def cmd_gen_prompts(opts: dict) -> int:
    if opts["count"] < 0:
        raise ConfigError("--count must be >= 0")
    taxonomy = load_taxonomy(opts["taxonomy"]) if opts["taxonomy"] else default_taxonomy()
    rng = np.random.default_rng(opts["seed"])
    lines = []
    client = None if opts["offline"] else LLMClient()
    for _ in range(opts["count"]):
        item, dims = sample_item_request(taxonomy, rng)
        request = build_promptgen_request(item, dims)
        if opts["offline"]:
            lines.append(json.dumps(
                {"item": item, "dims": list(dims), "request": request.to_obj()},
                separators=(",", ":"), ensure_ascii=False))
            continue
        prompts = parse_promptgen_response(client.complete(request))
        chosen = prompts[int(rng.integers(len(prompts)))]
        rubrics = parse_rubrics(client.complete(build_rubric_request(chosen)))
        lines.append(json.dumps(prompt_record(item, dims, chosen, rubrics),
                                separators=(",", ":"), ensure_ascii=False))
    _write_lines(opts["out"], lines)
    return 0


def cmd_rubric_validate(opts: dict) -> int:
    _require(opts, "input")
    lines = []
    bad = 0
    with open(opts["input"], "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            payload = line.rstrip("\n")
            if not payload.strip():
                continue
            try:
                rubrics = parse_rubrics(payload)
                lines.append(json.dumps(
                    {"line": line_no, "ok": True, "rubrics": len(rubrics.entries)},
                    separators=(",", ":")))
            except FormatError as exc:
                bad += 1
                lines.append(json.dumps(
                    {"line": line_no, "ok": False, "rule": exc.rule, "error": str(exc)},
                    separators=(",", ":")))
    _write_lines(opts["out"], lines)
    return 1 if bad else 0


def _cmd_evaluator(command: str):
    def evaluate(prompt: str) -> tuple[float, list[str]]:
        proc = subprocess.run(command, shell=True, input=prompt, text=True,
                              capture_output=True, check=True)
        out = proc.stdout.splitlines()
        if not out:
            raise DataError("evaluator produced no output")
        return float(out[0]), out[1:]

    return evaluate


def _cmd_rewriter(command: str):
    def rewrite(prompt: str, failures: list[str]) -> str:
        stdin = prompt + "\n---\n" + "\n".join(failures)
        proc = subprocess.run(command, shell=True, input=stdin, text=True,
                              capture_output=True, check=True)
        return proc.stdout.rstrip("\n")

    return rewrite


def _llm_rewriter():
    client = LLMClient()

    def rewrite(prompt: str, failures: list[str]) -> str:
        summary = "\n".join(f"- {f}" for f in failures) or "- none recorded"
        user = (
            "Current system prompt:\n"
            f"{prompt}\n\n"
            "Observed failure summaries:\n"
            f"{summary}\n\n"
            "Rewrite the system prompt to address these failures. "
            "Output only the rewritten system prompt."
        )
        request = ChatRequest(model=REWRITE_MODEL, temperature=0.7,
                              messages=[ChatMessage("user", user)])
        return client.complete(request).content

    return rewrite


def cmd_prompt_search(opts: dict) -> int:
    _require(opts, "initial", "evaluator_cmd")
    initial = Path(opts["initial"]).read_text(encoding="utf-8")
    evaluate = _cmd_evaluator(opts["evaluator_cmd"])
    rewrite = _cmd_rewriter(opts["rewriter_cmd"]) if opts["rewriter_cmd"] else _llm_rewriter()
    result = system_prompt_search(initial, evaluate, rewrite, opts["iterations"])
    if opts["out"]:
        Path(opts["out"]).write_text(result.best_prompt, encoding="utf-8")
    if opts["history_out"]:
        Path(opts["history_out"]).write_text(
            json.dumps({"best_score": result.best_score, "history": result.history}) + "\n",
            encoding="utf-8")
    print(f"best score {result.best_score} after {len(result.history) - 1} iterations")
    return 0


def cmd_compute_compare(opts: dict) -> int:
    _require(opts, "budgets")
    budgets = compute_mod.load_budgets(opts["budgets"])
    ratios = {
        a.label: {b.label: compute_mod.compute_ratio(a, b) for b in budgets}
        for a in budgets
    }
    if opts["json"]:
        print(json.dumps({
            "normalized_tflop_hours": {b.label: compute_mod.normalized_compute(b) for b in budgets},
            "ratios": ratios,
            "caveat": compute_mod.CAVEAT,
        }, indent=2))
        return 0
    width = max(len(b.label) for b in budgets)
    print(f"{'budget':<{width}}  gpu_hours  peak_tflops  tflop_hours")
    for b in budgets:
        print(f"{b.label:<{width}}  {b.gpu_hours:>9.0f}  {b.peak_tflops:>11.1f}  "
              f"{compute_mod.normalized_compute(b):>12.0f}")
    print()
    header = "  ".join(f"{b.label:>{width}}" for b in budgets)
    print(f"{'ratio of/to':<{width}}  {header}")
    for a in budgets:
        cells = "  ".join(f"{ratios[a.label][b.label]:>{width}.4f}" for b in budgets)
        print(f"{a.label:<{width}}  {cells}")
    print(compute_mod.CAVEAT)
    return 0


HANDLERS = {
    "stats": cmd_stats,
    "filter": cmd_filter,
    "dedup": cmd_dedup,
    "bucketize": cmd_bucketize,
    "schedule": cmd_schedule,
    "sample-timesteps": cmd_sample_timesteps,
    "nft-eval": cmd_nft_eval,
    "gen-prompts": cmd_gen_prompts,
    "rubric-validate": cmd_rubric_validate,
    "prompt-search": cmd_prompt_search,
    "compute-compare": cmd_compute_compare,
}


def dispatch(argv: list[str]) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    try:
        opts = _effective(args)
        return HANDLERS[args.command](opts)
    except (ConfigError, FilterConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (DataError, ManifestError, FormatError, TransportError, ValueError,
            OSError, subprocess.CalledProcessError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ChatError as exc:  # missing endpoint or malformed client setup
        print(f"error: {exc}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(dispatch(sys.argv[1:]))


if __name__ == "__main__":
    main()
