"""Command-line front end.

    cornerlayer match-coeffs --config problem.toml --kind Su --window 4 --out su.csv
    cornerlayer layer-correctors --config problem.toml --n-max 8 --out layer.csv
    cornerlayer expand --config problem.toml --ledger sigma.csv --window 3 --out series.json
    cornerlayer check --config problem.toml --suite matching

Exit codes: 0 ok, 2 configuration error, 3 missing input data, 4 failed
check, 5 resource cap.  Every output gets a manifest next to it; output
headers carry the config fingerprint and the manifest hash.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from importlib import metadata
from pathlib import Path

from .coeff_field import Degree, Lattice
from .config import ConfigError, ProblemConfig, load_config
from .formal_series import ResourceError, Window, WindowError

EXIT_OK, EXIT_CONFIG, EXIT_GAP, EXIT_CHECK, EXIT_RESOURCE = 0, 2, 3, 4, 5


def _version() -> str:
    try:
        return metadata.version("artifact")
    except metadata.PackageNotFoundError:
        return "0+unknown"


# ---------------------------------------------------------------- argument helpers

def parse_degree(text: str, lattice: Lattice) -> Degree:
    """An integer "a" or a pair "a:b" meaning a + b*pi/Theta."""
    try:
        if ":" in text:
            a, b = text.split(":")
            return lattice.deg(int(a), int(b))
        return lattice.integer(int(text))
    except ValueError:
        raise ConfigError("--window", f"cannot read degree {text!r}; use 'a' or 'a:b'") from None


def parse_window(text: str | None, config: ProblemConfig) -> tuple[Degree, Degree | None, Degree | None]:
    """P_MAX[,D_MIN,D_MAX]; P_MAX falls back to the config's window.p_max."""
    lat = config.lattice
    if text is None:
        if config.p_max is None:
            raise ConfigError("--window", "no window given and the config has no window.p_max")
        return lat.integer(config.p_max), None, None
    parts = text.split(",")
    if len(parts) not in (1, 3):
        raise ConfigError("--window", "expected P_MAX or P_MAX,D_MIN,D_MAX")
    p_max = parse_degree(parts[0], lat)
    if p_max.value < 0:
        raise ConfigError("--window", "P_MAX must be nonnegative")
    if len(parts) == 1:
        return p_max, None, None
    lo, hi = parse_degree(parts[1], lat), parse_degree(parts[2], lat)
    return p_max, lo, hi


class Manifest:
    """Run record written next to the outputs; its hash excludes timing and worker count."""

    def __init__(self, command: str, config: ProblemConfig, args: dict):
        self.data = {
            "tool": "cornerlayer",
            "version": _version(),
            "command": command,
            "config": config.to_json(),
            "fingerprint": config.fingerprint(),
            "arguments": {k: v for k, v in sorted(args.items()) if k != "workers"},
            "inputs": [],
            "outputs": [],
        }
        self.started = time.perf_counter()

    def add_input(self, path) -> None:
        p = Path(path)
        digest = hashlib.sha256(p.read_bytes()).hexdigest() if p.exists() else None
        self.data["inputs"].append({"path": str(p), "sha256": digest})

    def add_output(self, path) -> None:
        self.data["outputs"].append(str(path))

    @property
    def digest(self) -> str:
        blob = json.dumps(self.data, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]

    def header(self, extra: str) -> list[str]:
        return [f"cornerlayer {self.data['command']} {extra}".rstrip(),
                f"config {self.data['fingerprint']}", f"manifest {self.digest}"]

    def write(self, path: Path, workers: int | None = None) -> Path:
        record = dict(self.data)
        record["manifest_hash"] = self.digest
        record["timing_seconds"] = round(time.perf_counter() - self.started, 6)
        record["workers"] = workers
        target = path.with_name(path.stem + ".manifest.json")
        target.write_text(json.dumps(record, indent=2, sort_keys=True) + "\n")
        return target


def _load(args) -> ProblemConfig:
    config = load_config(args.config)
    if getattr(args, "precision", None):
        config = config.with_precision(args.precision)
    return config


# ---------------------------------------------------------------- commands

def cmd_match_coeffs(args) -> int:
    from .matching_engine import CoefficientBook, corner_coeff, read_profile, write_table

    config = _load(args)
    lat = config.lattice
    p_max, d_lo, d_hi = parse_window(args.window, config)
    d_lo = -p_max if d_lo is None else d_lo
    d_hi = p_max if d_hi is None else d_hi
    out = Path(args.out)
    man = Manifest("match-coeffs", config, {"kind": args.kind, "window": args.window or "",
                                            "ledger": args.ledger or "", "zero_ledger": args.zero_ledger})
    book = CoefficientBook(config, p_max, p_max)
    seeds = lat.pi_lattice_between(d_lo.value, d_hi.value)
    seeds = [d for d in seeds if d_lo <= d <= d_hi]
    if args.kind in ("uS", "Su"):
        book.fill(args.kind, seeds, args.workers)
        rows = book.rows(args.kind, seeds, d_lo, d_hi)
    else:
        if args.ledger:
            man.add_input(args.ledger)
            profile = read_profile(lat, args.ledger)
        elif args.zero_ledger:
            profile = None
        else:
            raise ConfigError("--ledger", "kind uu needs a corner-profile file or --zero-ledger")
        book.fill("uS", lat.pi_lattice_between(-2 * p_max.value, 2 * p_max.value), args.workers)
        book.fill("Su", seeds, args.workers)
        rows = []
        levels = lat.P_upto(p_max)
        l_top = 2 * book.max_l()
        for d in seeds:
            if d.value >= 0:
                continue
            for dp in seeds:
                for p in levels:
                    for l in range(l_top + 1):
                        v = corner_coeff(d, dp, p, l, book, profile)
                        if v != 0:
                            rows.append((d, dp, p, l, v))
        rows.sort(key=lambda r: (r[1].value, r[0].value, r[2].value, r[3]))
    targets = [out] if out.suffix.lower() == ".json" else [out, out.with_suffix(".json")]
    for t in targets:
        man.add_output(t)
    csv_text, doc = write_table(rows, config.scalars, man.header(f"kind={args.kind}"))
    for t in targets:
        if t.suffix.lower() == ".json":
            doc_full = {"kind": args.kind, "config": config.fingerprint(), "manifest": man.digest, **doc}
            t.write_text(json.dumps(doc_full, indent=1) + "\n")
        else:
            t.write_text(csv_text)
    man.write(out, args.workers)
    print(f"wrote {len(rows)} coefficients to {', '.join(map(str, targets))}")
    return EXIT_OK


def cmd_layer_correctors(args) -> int:
    import csv
    import io

    from .matching_engine import layer_correctors, tangent_coeff

    config = _load(args)
    if args.n_max < 0:
        raise ConfigError("--n-max", "must be nonnegative")
    out = Path(args.out)
    man = Manifest("layer-correctors", config, {"n_max": args.n_max})
    man.add_output(out)
    ratio = config.mu_ratio_exact
    U = layer_correctors(args.n_max, ratio)
    buf = io.StringIO()
    for line in man.header(f"n_max={args.n_max}"):
        buf.write(f"# {line}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["n", "value_at_0", "tangent", "value_at_0_float", "coefficients_in_Y"])
    for n, Un in enumerate(U):
        w.writerow([n, str(Un[0]), str(tangent_coeff(n)), repr(float(Un[0])), " ".join(str(c) for c in Un)])
    out.write_text(buf.getvalue())
    man.write(out)
    print(f"wrote {len(U)} layer correctors to {out}")
    return EXIT_OK


def cmd_expand(args) -> int:
    from .matching_engine import (
        SigmaLedger,
        TableIngest,
        build_Sinf_series,
        build_u0_series,
        graded_residual,
        sigma_recursion,
    )

    config = _load(args)
    lat = config.lattice
    p_max, d_lo, d_hi = parse_window(args.window, config)
    out = Path(args.out)
    man = Manifest("expand", config, {"window": args.window or "", "ledger": args.ledger or "",
                                      "zero_ledger": args.zero_ledger, "complete": args.complete})
    if args.ledger:
        man.add_input(args.ledger)
        ledger = SigmaLedger.read(lat, args.ledger)
    elif args.zero_ledger:
        ledger = SigmaLedger(lat)
    else:
        raise ConfigError("--ledger", "give a ledger file or --zero-ledger")
    if args.complete:
        source = TableIngest(ledger)
        ledger = sigma_recursion(SigmaLedger(lat), p_max, config, source, l_max=args.l_max)
    far_window = Window(p_max, p_max if d_hi is None else d_hi, +1)
    corner_window = Window(p_max, p_max if d_lo is None else -d_lo, -1)
    far = build_u0_series(ledger, far_window, config, max_cells=args.max_cells)
    corner = build_Sinf_series(ledger, corner_window, config, max_cells=args.max_cells)
    if d_lo is not None:
        far = far.restrict(lambda p, d, l: d_lo <= d <= d_hi)
        corner = corner.restrict(lambda p, d, l: d_lo <= d <= d_hi)
    man.add_output(out)
    doc = {
        "config": config.fingerprint(),
        "manifest": man.digest,
        "far_window": far_window.to_json(),
        "corner_window": corner_window.to_json(),
        "far": far.to_json(),
        "corner": corner.to_json(),
        "residual": {"far": graded_residual(far, config) if far else None,
                     "corner": graded_residual(corner, config) if corner else None},
    }
    out.write_text(json.dumps(doc, indent=1) + "\n")
    man.write(out)
    print(f"wrote {len(far)} far cells and {len(corner)} corner cells to {out}")
    return EXIT_OK


def cmd_check(args) -> int:
    from .checks import run_suite

    config = _load(args)
    try:
        results = run_suite(config, args.suite)
    except KeyError as exc:
        raise ConfigError("--suite", str(exc.args[0])) from None
    for r in results:
        print(r.line())
    report = {"config": config.fingerprint(), "suite": args.suite,
              "passed": all(r.passed for r in results), "results": [r.to_json() for r in results]}
    if args.out:
        out = Path(args.out)
        man = Manifest("check", config, {"suite": args.suite})
        man.add_output(out)
        report["manifest"] = man.digest
        out.write_text(json.dumps(report, indent=1) + "\n")
        man.write(out)
    return EXIT_OK if report["passed"] else EXIT_CHECK


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="cornerlayer", description=__doc__.split("\n\n")[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, window=True):
        p.add_argument("--config", required=True, help="TOML problem description")
        p.add_argument("--precision", choices=("double", "extended"), help="override the config precision")
        if window:
            p.add_argument("--window", help="P_MAX[,D_MIN,D_MAX]; degrees as 'a' or 'a:b' (a + b*pi/Theta)")

    p = sub.add_parser("match-coeffs", help="export a matching or corner coefficient table")
    common(p)
    p.add_argument("--kind", choices=("uS", "Su", "uu"), required=True)
    p.add_argument("--out", required=True)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--ledger", help="corner-profile table (kind uu)")
    group.add_argument("--zero-ledger", action="store_true", help="zero corner profiles (kind uu)")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_match_coeffs)

    p = sub.add_parser("layer-correctors", help="export the layer corrector polynomials")
    common(p, window=False)
    p.add_argument("--n-max", type=int, required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_layer_correctors)

    p = sub.add_parser("expand", help="build the far and corner series from a sigma ledger")
    common(p)
    group = p.add_mutually_exclusive_group()
    group.add_argument("--ledger", help="sigma ledger (CSV or JSON)")
    group.add_argument("--zero-ledger", action="store_true")
    p.add_argument("--complete", action="store_true",
                   help="run the sigma recursion first, reading variational cells from the ledger")
    p.add_argument("--l-max", type=int, default=1, help="largest ln(eps) power for --complete")
    p.add_argument("--max-cells", type=int, default=200_000)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("check", help="run a verification suite")
    common(p, window=False)
    p.add_argument("--suite", default="all")
    p.add_argument("--out", help="JSON report path")
    p.set_defaults(func=cmd_check)
    return parser


def main(argv: list[str] | None = None) -> int:
    from .matching_engine import DataGapError

    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "workers", 1) < 1:
        print("error: --workers must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"configuration error in {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataGapError as exc:
        print(f"data gap: {exc}", file=sys.stderr)
        return EXIT_GAP
    except (ResourceError, WindowError) as exc:
        print(f"resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
