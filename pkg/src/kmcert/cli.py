"""Command-line entry point.

Exit codes: 0 success, 1 I/O failure, 2 a certified claim failed, 64 usage error.
Heavy modules are imported inside the commands so that ``--threads`` can cap
the BLAS pools before any matrix work starts.
"""

from __future__ import annotations

import csv
import io
import json
import math
import os
import sys
import time

import click

EXIT_OK, EXIT_IO, EXIT_FAIL, EXIT_USAGE = 0, 1, 2, 64


def _num(x) -> str:
    x = float(x)
    if math.isnan(x) or math.isinf(x):
        return "null"
    return format(x, ".17g")


def dumps(obj, indent: int = 2, _level: int = 0) -> str:
    """JSON with floats written to 17 significant digits."""
    pad = " " * (indent * (_level + 1))
    end = " " * (indent * _level)
    if isinstance(obj, bool) or obj is None or isinstance(obj, (int, str)):
        return json.dumps(obj)
    if isinstance(obj, float):
        return _num(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {dumps(v, indent, _level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple)):
        if not obj:
            return "[]"
        items = [f"{pad}{dumps(v, indent, _level + 1)}" for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    if hasattr(obj, "item"):
        return dumps(obj.item(), indent, _level)
    raise TypeError(f"cannot serialise {type(obj).__name__}")


def _write(path: str | None, text: str) -> None:
    if path is None or path == "-":
        click.echo(text, nl=False)
        return
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([_num(v) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


@click.group()
@click.option("--threads", type=click.IntRange(min=1), default=None,
              help="BLAS thread count (default: all logical cores).")
@click.pass_context
def cli(ctx: click.Context, threads: int | None) -> None:
    ctx.ensure_object(dict)
    ctx.obj["threads"] = threads or os.cpu_count() or 1
    if threads is not None:
        from threadpoolctl import threadpool_limits
        ctx.obj["limits"] = threadpool_limits(limits=threads)


@cli.command()
@click.option("--out", type=str, default="-", show_default=True, help="Certificate path ('-' for stdout).")
@click.option("--claim", "claims", multiple=True, help="Run only these claims (repeatable).")
@click.option("--delta", type=click.FloatRange(min=1e-6, max=0.1), default=1e-3, show_default=True)
@click.option("--kappa", type=float, default=0.0, show_default=True)
def certify(out: str, claims: tuple[str, ...], delta: float, kappa: float) -> int:
    """Run the interval certificate."""
    from . import certify as cert_mod

    if kappa != 0.0:
        raise click.UsageError("certification is only available for --kappa 0")
    bad = [c for c in claims if c not in cert_mod.CLAIMS]
    if bad:
        raise click.UsageError(f"unknown claim(s) {bad}; choose from {list(cert_mod.CLAIMS)}")
    t0 = time.time()
    cert = cert_mod.run_all(kappa, claims or None, delta)
    doc = cert.to_json()
    doc["meta"] = {**doc["meta"], "started_unix": t0, "elapsed_s": time.time() - t0}
    _write(out, dumps(doc) + "\n")
    for r in cert.records:
        click.echo(f"{r.claim_id:12s} {'pass' if r.passed else 'FAIL'}", err=True)
    return EXIT_OK if cert.passed else EXIT_FAIL


@cli.command()
@click.option("--n", "n", type=click.IntRange(min=2), default=101, show_default=True)
@click.option("--out", type=str, default="-", show_default=True)
@click.option("--kappa", type=float, default=0.0, show_default=True)
def landscape(n: int, out: str, kappa: float) -> int:
    """Export S_bar(th^-1 x, th^-1 y) on an n-by-n grid over [-0.99, 0.99]^2 as CSV."""
    from .firstmoment import LandscapeGrid, landscape_scan

    res = landscape_scan(LandscapeGrid(n=n), kappa=kappa)
    rows = zip(res["x"].tolist(), res["y"].tolist(), res["value"].tolist())
    _write(out, _csv(["x", "y", "value"], rows))
    click.echo(f"max {res['max']:.6g} at {res['argmax']}", err=True)
    return EXIT_OK


@cli.command()
@click.option("--alpha-star", "want_alpha", is_flag=True, help="Bracket the capacity by bisection.")
@click.option("--alpha", type=float, default=None, help="Solve the fixed point at this alpha instead.")
@click.option("--kappa", type=float, default=0.0, show_default=True)
@click.option("--tol", type=click.FloatRange(min=1e-14), default=1e-11, show_default=True)
@click.option("--certify-sign", is_flag=True, help="Also certify the sign change of G* in intervals.")
def threshold(want_alpha: bool, alpha: float | None, kappa: float, tol: float, certify_sign: bool) -> int:
    """Fixed point (q, psi) and the capacity bracket."""
    from . import threshold as th

    if want_alpha == (alpha is not None):
        raise click.UsageError("give exactly one of --alpha-star or --alpha")
    if want_alpha:
        if certify_sign and kappa != 0.0:
            raise click.UsageError("--certify-sign is only available for --kappa 0")
        br = th.alpha_star(kappa, tol=tol, certify=certify_sign)
        q, psi = th.fixed_point(br.mid, kappa)
        doc = {"kappa": kappa, "alpha_lo": br.lo, "alpha_hi": br.hi, "q": q, "psi": psi,
               "sign_certified": bool(certify_sign)}
    else:
        q, psi = th.fixed_point(alpha, kappa)
        doc = {"kappa": kappa, "alpha": alpha, "q": q, "psi": psi, "G_star": th.gardner_star(alpha, kappa)}
    _write("-", dumps(doc) + "\n")
    return EXIT_OK


@cli.command()
@click.option("--N", "N", type=click.IntRange(min=2), default=2000, show_default=True)
@click.option("--M", "M", type=click.IntRange(min=1), default=None, help="Default floor(alpha* N).")
@click.option("--k", "k", type=click.IntRange(min=1, max=200), default=8, show_default=True)
@click.option("--eps", type=click.FloatRange(min=0.0, max=0.5), default=0.05, show_default=True)
@click.option("--seed", type=click.IntRange(min=0), default=0, show_default=True)
@click.option("--out", type=str, default="-", show_default=True)
def amp(N: int, M: int | None, k: int, eps: float, seed: int, out: str) -> int:
    """Perturbed AMP on null disorder; per-iteration diagnostics CSV."""
    from . import ampsim
    from .threshold import perturbed_fixed_point

    if eps == 0.0:
        raise click.UsageError("the diagnostics use the perturbed free energy; --eps must be positive")
    fp = perturbed_fixed_point(eps)
    d = ampsim.sample_disorder(N, M or ampsim.default_M(N, fp.alpha), seed)
    rows = ampsim.amp_diagnostics(d, fp, k)
    _write(out, _csv(["k", "grad_norm", "q_err", "psi_err"],
                     ([r["k"], r["grad_norm"], r["q_err"], r["psi_err"]] for r in rows)))
    return EXIT_OK


@cli.command()
@click.option("--N", "N", type=click.IntRange(min=2), default=1000, show_default=True)
@click.option("--k", "k", type=click.IntRange(min=0, max=12), default=10, show_default=True)
@click.option("--seeds", type=click.IntRange(min=1), default=3, show_default=True)
@click.option("--eps", type=click.FloatRange(min=1e-6, max=0.5), default=0.05, show_default=True)
@click.option("--edge/--no-edge", default=False, help="Also estimate the spectral edge (N <= 1500).")
@click.option("--out", type=str, default="-", show_default=True)
def planted(N: int, k: int, seeds: int, eps: float, edge: bool, out: str) -> int:
    """Return-home distances (and optionally the spectral edge) on planted disorder."""
    from . import planted as pl
    from .threshold import perturbed_fixed_point

    if edge and N > 1500:
        raise click.UsageError("--edge needs N <= 1500")
    fp = perturbed_fixed_point(eps)
    res = pl.return_home(N, fp, k, range(seeds))
    rows = []
    for i, s in enumerate(res["seeds"]):
        e = float("nan")
        if edge:
            inp = pl.planted_input(N, fp, s)
            e = pl.top_eigenvalue(inp, pl.planted_sample(inp))
        for j in range(k + 1):
            rows.append([s, j, float(res["dist_m"][i, j]), float(res["dist_n"][i, j]), e])
    _write(out, _csv(["seed", "k", "dist_m", "dist_n", "edge"], rows))
    if edge:
        sq = pl.spectral_quantities(fp)
        click.echo(f"lambda_eps + d_eps = {sq.lambda_eps + sq.d_eps:.10g}", err=True)
    return EXIT_OK


def main(argv: list[str] | None = None) -> None:
    try:
        rc = cli.main(args=argv, prog_name="kmcert", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        sys.exit(EXIT_USAGE)
    except click.exceptions.Abort:
        sys.exit(EXIT_IO)
    except click.ClickException as exc:
        exc.show()
        sys.exit(EXIT_IO)
    except OSError as exc:
        click.echo(f"I/O error: {exc}", err=True)
        sys.exit(EXIT_IO)
    sys.exit(rc if isinstance(rc, int) else EXIT_OK)


if __name__ == "__main__":
    main()
