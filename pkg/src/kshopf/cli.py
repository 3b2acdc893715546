"""Command-line front end.

Verbs: ``steady``, ``hopf-seed``, ``continue``, ``validate``, ``all``.
Exit status is 0 when every requested validation succeeded, 1 on a
validation or computation failure and 2 on a configuration error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import os
import sys
import time
import warnings
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import continuation as cont
from .config import ConfigError, RunConfig, apply_overrides, load
from .sequences import component_norm, dump_json, xvector_from_json, xvector_to_json
from .validator import ValidationConfig, validate_segment

log = logging.getLogger("kshopf")

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


# pipeline stages ---------------------------------------------------------------------

def steady_table(cfg: RunConfig, n: int = 30) -> list:
    lams = np.linspace(cfg.lambda2_to, cfg.lambda2_from, n)
    rows = []
    for lam, y in cont.steady_branch(lams, cfg.N):
        k = np.arange(-cfg.N, cfg.N + 1)
        rows.append((float(lam), float(np.sum(cfg.nu2 ** np.abs(k) * np.abs(y))), float(abs(y[cfg.N + 2]))))
    return rows


def hopf_seed(cfg: RunConfig, K=None, nu=None):
    K = cfg.K if K is None else tuple(K)
    nu1, nu2 = (cfg.nu1, cfg.nu2) if nu is None else nu
    return cont.initial_hopf_guess((cfg.lambda2_from, cfg.lambda2_to), K, nu1, nu2)


def branch(cfg: RunConfig, seed, K=None) -> cont.BranchRun:
    K = cfg.K if K is None else tuple(K)
    sc = cont.StepConfig(K=K, mode=cfg.mode, a_from=cfg.a_from, a_to=cfg.a_to, a_step=cfg.a_step,
                         newton_tol=cfg.newton_tol)
    return cont.step_branch(seed, sc)


def _validate_one(args):
    anchors, vcfg, echo = args
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return validate_segment(anchors, vcfg, echo)


def validate_run(run: cont.BranchRun, cfg: RunConfig, K, nu, threads: int, stop_on_failure: bool = False,
                 start: int = 0) -> list:
    """Certificates for all segments, in order (a worker pool when ``threads > 1``)."""
    vcfg = ValidationConfig(R=cfg.R, n_scan=cfg.n_scan, K=tuple(K))
    echo = dict(cfg.to_dict(), M=K[0], N=K[1], nu1=nu[0], nu2=nu[1])
    jobs = [(s.anchors(), vcfg, dict(echo, segment=i)) for i, s in enumerate(run.segments, start=start)]
    if threads > 1 and not stop_on_failure:
        with ProcessPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(_validate_one, jobs))
    out = []
    for i, job in enumerate(jobs, start=start):
        t = time.time()
        c = _validate_one(job)
        log.info("segment %d: validated=%s r*=%s (%.1fs)", i, c.validated, c.r_star, time.time() - t)
        out.append(c)
        if stop_on_failure and not c.validated:
            break
    return out


def candidates(cfg: RunConfig) -> list:
    """Configurations tried in order: the requested one, then the search grid."""
    out = [(cfg.K, (cfg.nu1, cfg.nu2))]
    if cfg.search:
        for K in cfg.search_K:
            for nu in cfg.search_nu:
                c = (tuple(K), (float(nu), float(nu)))
                if c not in out:
                    out.append(c)
    return out


def chain_ok(certs: list, n_min: int = 5) -> bool:
    return (len(certs) >= n_min and all(c.validated for c in certs)
            and sum(c.hopf_crossing for c in certs) == 1)


def crossing_interval(seg: cont.BranchSegment):
    """Enclosure of the s at which ``a(s) = (1-s) a0 + s a1`` vanishes."""
    a0 = complex(seg.xhat0.a.mid).real
    a1 = complex(seg.xhat1.a.mid).real
    s = a0 / (a0 - a1)
    return [float(np.nextafter(np.nextafter(s, -np.inf), -np.inf)),
            float(np.nextafter(np.nextafter(s, np.inf), np.inf))]


def search_and_validate(cfg: RunConfig):
    """Run continuation and validation over the candidate list until a chain validates."""
    attempts = []
    for K, nu in candidates(cfg):
        t = time.time()
        log.info("trying K=%s nu=%s", K, nu)
        try:
            seed = hopf_seed(cfg, K, nu)
            run = branch(cfg, seed, K)
        except (cont.NoConvergence, cont.SingularJacobian, cont.NoCrossing, cont.StepFailure) as exc:
            attempts.append({"K": list(K), "nu": list(nu), "error": str(exc)})
            continue
        if run.aborted or not run.segments:
            attempts.append({"K": list(K), "nu": list(nu), "error": run.aborted or "empty run"})
            continue
        probe = validate_run(_first(run), cfg, K, nu, 1, stop_on_failure=True)
        if not probe[0].validated:
            attempts.append({"K": list(K), "nu": list(nu), "error": "probe segment failed",
                             "stage_failures": probe[0].stage_failures, "seconds": time.time() - t})
            if not cfg.search:
                return run, probe, K, nu, attempts
            continue
        rest = validate_run(_tail(run), cfg, K, nu, cfg.threads, start=1)
        certs = probe + rest
        attempts.append({"K": list(K), "nu": list(nu), "validated": sum(c.validated for c in certs),
                         "segments": len(certs), "seconds": time.time() - t})
        if chain_ok(certs) or not cfg.search:
            return run, certs, K, nu, attempts
    return None, [], None, None, attempts


def _first(run):
    return cont.BranchRun(run.segments[:1], run.aborted)


def _tail(run):
    return cont.BranchRun(run.segments[1:], run.aborted)


# output ------------------------------------------------------------------------------

def write_outputs(out: str, run, certs: list, K, nu, attempts: list, cfg: RunConfig) -> dict:
    os.makedirs(out, exist_ok=True)
    summary = {"config": cfg.to_dict(), "attempts": attempts}
    if run is not None:
        run.to_csv(os.path.join(out, "branch.csv"))
        adir = os.path.join(out, "anchors")
        os.makedirs(adir, exist_ok=True)
        run.dump_anchors(adir)
    if certs:
        cdir = os.path.join(out, "certificates")
        os.makedirs(cdir, exist_ok=True)
        for i, c in enumerate(certs):
            with open(os.path.join(cdir, f"certificate_{i:03d}.json"), "w") as fh:
                fh.write(c.dumps())
    crossings = []
    if run is not None:
        for i, c in enumerate(certs):
            if c.hopf_crossing:
                crossings.append({"segment": i, "s_interval": crossing_interval(run.segments[i])})
    summary.update({
        "K": list(K) if K else None,
        "nu": list(nu) if nu else None,
        "segments": len(run.segments) if run is not None else 0,
        "validated": sum(c.validated for c in certs),
        "failed": sum(not c.validated for c in certs),
        "hopf_crossings": crossings,
        "chain_ok": chain_ok(certs),
    })
    with open(os.path.join(out, "summary.json"), "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    return summary


def _print_summary(s: dict) -> None:
    print(f"truncation K={s['K']} weights nu={s['nu']}")
    print(f"segments: {s['segments']}  validated: {s['validated']}  failed: {s['failed']}")
    for h in s["hopf_crossings"]:
        print(f"hopf crossing on segment {h['segment']}, s in [{h['s_interval'][0]!r}, {h['s_interval'][1]!r}]")
    if not s["hopf_crossings"]:
        print("no validated hopf crossing")


# argument handling --------------------------------------------------------------------

_FLAGS = {
    "M": int, "N": int, "nu1": float, "nu2": float, "R": float, "mode": str,
    "a_from": float, "a_to": float, "a_step": float, "out": str, "threads": int, "seed": int,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="kshopf", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="verb", required=True)
    for verb in ("steady", "hopf-seed", "continue", "validate", "all"):
        sp = sub.add_parser(verb)
        sp.add_argument("--config", help="TOML configuration file")
        for name, typ in _FLAGS.items():
            sp.add_argument("--" + name.replace("_", "-"), dest=name, type=typ, default=None)
        sp.add_argument("--dry-run", action="store_true", help="print the resolved config and plan, then exit")
        sp.add_argument("--no-search", action="store_true", help="do not fall back to the configuration search")
        sp.add_argument("-v", "--verbose", action="store_true")
        if verb == "validate":
            sp.add_argument("--anchors", help="directory of anchor JSON files from a previous run")
    return p


def resolve(ns: argparse.Namespace) -> RunConfig:
    cfg = load(ns.config) if ns.config else RunConfig().validate()
    over = {k: getattr(ns, k) for k in _FLAGS}
    if ns.no_search:
        over["search"] = False
    return apply_overrides(cfg, over)


def _plan(cfg: RunConfig, verb: str) -> dict:
    n = len(cont.a_grid(cfg.a_from, cfg.a_to, cfg.a_step)) - 1
    return {"verb": verb, "config": cfg.to_dict(), "planned_segments": n,
            "candidates": [[list(K), list(nu)] for K, nu in candidates(cfg)]}


def _load_anchor_run(directory: str, mode: str) -> cont.BranchRun:
    names = sorted(f for f in os.listdir(directory) if f.startswith("anchor_") and f.endswith(".json"))
    xs = []
    for f in names:
        with open(os.path.join(directory, f)) as fh:
            xs.append(xvector_from_json(json.load(fh)))
    if len(xs) < 2:
        raise ConfigError(f"need at least two anchors in {directory}")
    segs = [cont.BranchSegment(x0, x1, None, 0.0, (), mode) for x0, x1 in zip(xs[:-1], xs[1:])]
    return cont.BranchRun(segs)


def main(argv=None) -> int:
    ns = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if ns.verbose else logging.WARNING, format="%(message)s")
    try:
        cfg = resolve(ns)
        if getattr(ns, "anchors", None) and not os.path.isdir(ns.anchors):
            raise ConfigError(f"no such directory: {ns.anchors}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if ns.dry_run:
        print(json.dumps(_plan(cfg, ns.verb), indent=2, sort_keys=True))
        return EXIT_OK
    np.random.seed(cfg.seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        try:
            return _dispatch(ns, cfg)
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG
        except (cont.NoConvergence, cont.SingularJacobian, cont.NoCrossing, cont.StepFailure) as exc:
            print(f"computation failed: {type(exc).__name__}: {exc}", file=sys.stderr)
            return EXIT_FAIL


def _dispatch(ns, cfg: RunConfig) -> int:
    verb = ns.verb
    if verb == "steady":
        rows = steady_table(cfg)
        os.makedirs(cfg.out, exist_ok=True)
        with open(os.path.join(cfg.out, "steady.csv"), "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["lambda2", "norm_y", "abs_y2"])
            w.writerows(rows)
        print(f"{len(rows)} steady states written to {os.path.join(cfg.out, 'steady.csv')}")
        return EXIT_OK
    if verb == "hopf-seed":
        x = hopf_seed(cfg)
        os.makedirs(cfg.out, exist_ok=True)
        dump_json(xvector_to_json(x), os.path.join(cfg.out, "hopf_seed.json"))
        _, ny, nz = component_norm(x)
        print(f"lambda2*={complex(x.lambda2.mid).real!r} lambda1={complex(x.lambda1.mid).real!r} "
              f"|y|={ny:.6g} |z|={nz:.6g}")
        return EXIT_OK
    if verb == "continue":
        run = branch(cfg, hopf_seed(cfg))
        write_outputs(cfg.out, run, [], cfg.K, (cfg.nu1, cfg.nu2), [], cfg)
        print(f"{len(run.segments)} segments, hopf crossings at {run.hopf_crossings}"
              + (f", aborted: {run.aborted}" if run.aborted else ""))
        return EXIT_FAIL if run.aborted else EXIT_OK
    if verb == "validate" and ns.anchors:
        run = _load_anchor_run(ns.anchors, cfg.mode)
        certs = validate_run(run, cfg, cfg.K, (cfg.nu1, cfg.nu2), cfg.threads)
        s = write_outputs(cfg.out, run, certs, cfg.K, (cfg.nu1, cfg.nu2), [], cfg)
        _print_summary(s)
        return EXIT_OK if certs and all(c.validated for c in certs) else EXIT_FAIL
    run, certs, K, nu, attempts = search_and_validate(cfg)
    s = write_outputs(cfg.out, run, certs, K, nu, attempts, cfg)
    _print_summary(s)
    ok = bool(certs) and all(c.validated for c in certs)
    if cfg.mode == "parameter_in_a":
        ok = ok and chain_ok(certs)
    return EXIT_OK if ok else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
