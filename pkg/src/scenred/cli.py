"""Command line entry point: ``scenred <command> [flags]``."""
import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from .bench import (baseline_kmedoids_instance, baseline_random, baseline_value_space,
                    evaluate_selection, order_cdf_experiment)
from .config import load_config
from .core import (augment_instance, gen_cflp, gen_ndp, load_instance, save_instance,
                   solve_instance)
from .errors import InvalidArgument
from .mip import Solver
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.policy import PolicyParams, policy_inputs
from .train import METRIC_FIELDS, greedy_selection, train

log = logging.getLogger("scenred")

MANIFEST = "manifest.json"
REPORT_FIELDS = ["instanceId", "method", "k", "seed", "errorPct", "reducedObjective", "fullF", "vStar",
                 "pivots", "nodes", "wallSeconds", "percentile"]
BASELINES = ("random", "kmedoids", "valueSpace")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(1, f"{self.prog}: error: {message}\n")


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, fields, rows, cfg):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        fh.write(f"# config={cfg.to_json()}\n")
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            w.writerow([_fmt(r.get(f)) for f in fields])


def read_csv(path):
    """Return ``(config_dict, rows)`` for a file written by ``write_csv``."""
    with open(path, newline="") as fh:
        first = fh.readline()
        cfg = json.loads(first[len("# config="):]) if first.startswith("# config=") else {}
        return cfg, list(csv.DictReader(fh))


def make_solver(cfg):
    return Solver(node_limit=cfg.solver.node_limit, gap=cfg.solver.gap, cache_size=cfg.solver.cache_size)


# --------------------------------------------------------------------------- dataset helpers

def _instance_seed(base, i):
    return int(base) * 1_000_000 + int(i)


def _make_instance(pc, seed):
    if pc.family == "CFLP":
        inst = gen_cflp(pc.facilities, pc.customers, pc.scenarios, seed)
    else:
        inst = gen_ndp(pc.sources, pc.sinks, pc.intermediates, pc.scenarios, seed)
    if (pc.scale_lo, pc.scale_hi) != (1.0, 1.0):
        inst = augment_instance(inst, pc.scale_lo, pc.scale_hi, seed)
    return inst


def load_dataset(directory):
    directory = Path(directory)
    mpath = directory / MANIFEST
    if not mpath.exists():
        raise FileNotFoundError(f"no dataset manifest at {mpath}")
    manifest = json.loads(mpath.read_text())
    return [(e["id"], load_instance(directory / e["file"])) for e in manifest["instances"]]


def _map(fn, items, threads):
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(fn, items))


# --------------------------------------------------------------------------- commands

def cmd_generate(cfg):
    pc = cfg.problem
    out = Path(cfg.paths.dataset)
    out.mkdir(parents=True, exist_ok=True)

    def work(i):
        seed = _instance_seed(pc.seed, i)
        iid = f"{pc.family.lower()}_{i:04d}"
        inst = _make_instance(pc, seed)
        opt = solve_instance(inst, make_solver(cfg), cfg.solver.enum_limit)
        return iid, seed, inst, opt

    entries, skipped = [], []
    for iid, seed, inst, opt in _map(work, range(pc.count), cfg.threads):
        if opt is None:
            log.warning("%s: node limit reached before optimality, skipped", iid)
            skipped.append({"id": iid, "seed": seed, "reason": "node limit"})
            continue
        inst = inst.with_optimum(opt)
        save_instance(inst, out / f"{iid}.json")
        entries.append({"id": iid, "seed": seed, "file": f"{iid}.json", "vStar": opt.value})
    manifest = {"format": "scenred-manifest", "version": 1, "config": cfg.to_dict(),
                "instances": entries, "skipped": skipped}
    (out / MANIFEST).write_text(json.dumps(manifest, indent=1, sort_keys=True) + "\n")
    print(f"wrote {len(entries)} instances to {out} ({len(skipped)} skipped)")
    return 0


def cmd_solve_ef(cfg, use_ef=False):
    data = load_dataset(cfg.paths.dataset)
    solver = make_solver(cfg)
    rows, bad = [], 0
    for iid, inst in data:
        fresh = inst.with_optimum(None)
        opt = solve_instance(fresh, solver, 0 if use_ef else cfg.solver.enum_limit)
        v = float("nan") if opt is None else opt.value
        diff = abs(v - inst.optimum.value) if inst.optimum is not None else float("nan")
        ok = diff <= 1e-6 * max(1.0, abs(v))
        bad += not ok
        rows.append({"instanceId": iid, "vStar": None if inst.optimum is None else inst.optimum.value,
                     "vSolved": v, "absDiff": diff, "match": int(ok),
                     "x": " ".join(str(int(round(t))) for t in (opt.x if opt is not None else []))})
    write_csv(Path(cfg.paths.out) / "solve_ef.csv", ["instanceId", "vStar", "vSolved", "absDiff", "match", "x"],
              rows, cfg)
    print(f"re-solved {len(rows)} instances, {bad} mismatches")
    return 2 if bad else 0


def cmd_train(cfg):
    data = load_dataset(cfg.paths.dataset)
    val = load_dataset(cfg.paths.val_dataset) if cfg.paths.val_dataset else None
    out = Path(cfg.paths.out)
    ckdir = out / "checkpoints"
    echo = cfg.to_dict()
    init = PolicyParams.init(cfg.net, cfg.seed)
    save_checkpoint(ckdir / "ckpt_00000.json", init, echo, {"update": 0})
    rows = []

    def on_update(u, params, row):
        rows.append(row)
        if cfg.train.checkpoint_every > 0 and u % cfg.train.checkpoint_every == 0:
            save_checkpoint(ckdir / f"ckpt_{u:05d}.json", params, echo, {"update": u})

    res = train(data, cfg.k, cfg.seed, cfg.net, cfg.ppo, cfg.reward, make_solver(cfg), val,
                max_updates=None if cfg.train.max_updates < 0 else cfg.train.max_updates,
                on_update=on_update)
    save_checkpoint(out / "policy.json", res.params, echo, {"update": len(rows)})
    write_csv(out / "metrics.csv", METRIC_FIELDS, rows, cfg)
    if res.aborted:
        print(f"training aborted: {res.aborted}; last good parameters kept in {out / 'policy.json'}")
        return 2
    if val:
        print(f"best validation errorPct: {res.best_val_error!r}")
    else:
        print(f"trained {len(rows)} updates; no validation set configured")
    return 0


def _report_row(rep, cfg, percentile=None):
    return {"instanceId": rep.instance_id, "method": rep.method, "k": rep.k, "seed": rep.seed,
            "errorPct": rep.error_pct, "reducedObjective": rep.reduced_objective, "fullF": rep.full_f,
            "vStar": rep.v_star, "pivots": rep.work.simplex_pivots, "nodes": rep.work.bnb_nodes,
            "wallSeconds": rep.wall_seconds if cfg.report.record_wall else None,
            "percentile": percentile}


def _selection(method, inst, k, seed, solver, cfg):
    if method == "random":
        return baseline_random(inst.num_scenarios, k, seed)
    if method == "kmedoids":
        return baseline_kmedoids_instance(inst, k, seed, cfg.report.baseline_restarts)
    if method == "valueSpace":
        return baseline_value_space(inst, k, solver, seed, cfg.report.baseline_restarts)
    raise InvalidArgument(f"unknown method {method}")


def _summarize(rows, methods, seeds):
    lines = []
    for m in methods:
        per_seed = []
        for s in seeds:
            vals = [r["errorPct"] for r in rows if r["method"] == m and r["seed"] == s]
            if vals:
                per_seed.append(float(np.mean(vals)))
        if per_seed:
            lines.append(f"{m}: errorPct {np.mean(per_seed):.4f} +/- {np.std(per_seed):.4f} "
                         f"over {len(per_seed)} seed(s)")
    return lines


def _load_policy(cfg, checkpoint):
    if not checkpoint:
        raise UsageError("--checkpoint is required for this command")
    params, _, _ = load_checkpoint(checkpoint, expect=cfg.net)
    return params


def cmd_evaluate(cfg, checkpoint, methods=("policy",) + BASELINES):
    params = _load_policy(cfg, checkpoint) if "policy" in methods else None
    data = load_dataset(cfg.paths.dataset)
    solver = make_solver(cfg)
    k = cfg.k

    def work(item):
        iid, inst = item
        out = []
        gi = policy_inputs(inst, params.config) if params is not None else None
        for seed in cfg.seeds:
            for m in methods:
                sel = greedy_selection(params, gi, k) if m == "policy" else \
                    _selection(m, inst, k, seed, solver, cfg)
                rep = evaluate_selection(inst, sel, solver, iid, m, seed)
                out.append(_report_row(rep, cfg))
        return out

    rows = [r for chunk in _map(work, data, cfg.threads) for r in chunk]
    name = "report.csv" if "policy" in methods else "baselines.csv"
    write_csv(Path(cfg.paths.out) / name, REPORT_FIELDS, rows, cfg)
    for line in _summarize(rows, methods, cfg.seeds):
        print(line)
    return 0


def cmd_order_cdf(cfg, checkpoint):
    params = _load_policy(cfg, checkpoint)
    data = load_dataset(cfg.paths.dataset)
    solver = make_solver(cfg)
    shuffles = cfg.report.shuffles
    rows, pct = [], []
    for seed in cfg.seeds:
        for n, (iid, inst) in enumerate(data):
            sel = greedy_selection(params, policy_inputs(inst, params.config), cfg.k)
            p, samples, model = order_cdf_experiment(inst, sel, shuffles, [seed, n], solver,
                                                     cfg.reward.node_weight, cfg.reward.time_scale)
            pct.append(p)
            rows.append({"instanceId": iid, "seed": seed, "sample": "model", "time": model, "percentile": p})
            rows += [{"instanceId": iid, "seed": seed, "sample": j, "time": float(t), "percentile": p}
                     for j, t in enumerate(samples)]
    write_csv(Path(cfg.paths.out) / "order_cdf.csv", ["instanceId", "seed", "sample", "time", "percentile"],
              rows, cfg)
    print(f"pooled mean percentile: {np.mean(pct)!r} over {len(pct)} instance runs")
    return 0


# --------------------------------------------------------------------------- entry point

def build_parser():
    p = _Parser(prog="scenred", description="Learned scenario reduction for two-stage stochastic programs.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)
    common = _Parser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON run configuration")
    common.add_argument("--seed", type=int)
    common.add_argument("--dataset", metavar="DIR")
    common.add_argument("--checkpoint", metavar="PATH")
    common.add_argument("--out", metavar="DIR")
    common.add_argument("--k", type=int)
    common.add_argument("--threads", type=int)
    common.add_argument("-v", "--verbose", action="store_true")
    sub.add_parser("generate", parents=[common], help="generate instances and their exact optima")
    s = sub.add_parser("solve-ef", parents=[common], help="re-solve dataset instances and check v*")
    s.add_argument("--ef", action="store_true", help="always branch and bound the extensive form")
    sub.add_parser("train", parents=[common], help="train the selection policy with PPO")
    sub.add_parser("evaluate", parents=[common], help="policy and baselines on a dataset")
    sub.add_parser("order-cdf", parents=[common], help="ordering experiment against random shuffles")
    sub.add_parser("baselines", parents=[common], help="baseline methods only")
    return p


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    overrides = {"seed": args.seed, "k": args.k, "threads": args.threads,
                 "paths.dataset": args.dataset, "paths.out": args.out}
    if args.seed is not None:
        overrides["seeds"] = (args.seed,)
    try:
        cfg = load_config(args.config, overrides=overrides)
    except InvalidArgument as e:
        parser.exit(1, f"scenred: error: {e}\n")
    try:
        if args.command == "generate":
            return cmd_generate(cfg)
        if args.command == "solve-ef":
            return cmd_solve_ef(cfg, args.ef)
        if args.command == "train":
            return cmd_train(cfg)
        if args.command == "evaluate":
            return cmd_evaluate(cfg, args.checkpoint)
        if args.command == "order-cdf":
            return cmd_order_cdf(cfg, args.checkpoint)
        if args.command == "baselines":
            return cmd_evaluate(cfg, None, BASELINES)
    except UsageError as e:
        parser.exit(1, f"scenred: error: {e}\n")
    except Exception as e:  # noqa: BLE001 - any runtime failure maps to exit code 2
        log.debug("failure", exc_info=True)
        print(f"scenred: {type(e).__name__}: {e}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
