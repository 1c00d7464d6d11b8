"""Command-line entry point: ``coxprior <command> ...``.

Exit codes: 0 success, 2 bad arguments, 3 data errors, 4 inference
failures, 5 R-hat at or above 1.01.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from . import __version__
from .cox import Ties
from .dataset import DataError, SimulationConfig, read_csv, simulate, write_csv
from .elicitation import (
    MOCK_MODELS,
    ElicitationError,
    ProviderConfig,
    build_prompt,
    elicit_with_transcript,
    parse_response,
    sanity_check,
)
from .inference import InferenceError, Method, PosteriorSummary, SamplerConfig, analyze
from .plotting import curves_csv, curves_svg
from .priors import PriorError, dump_priors, load_priors, parse_prior_literal, preset_priors, prior_summary
from .sensitivity import Format, render_report, run_sensitivity

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_INFERENCE, EXIT_RHAT = 0, 2, 3, 4, 5
RHAT_LIMIT = 1.01


class UsageError(Exception):
    pass


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _load_data(path: str):
    try:
        return read_csv(path)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _prior(text: str):
    try:
        return parse_prior_literal(text)
    except PriorError as exc:
        raise UsageError(str(exc)) from None


def _prior_set(spec: str):
    if spec.lower() == "all":
        return preset_priors()
    try:
        return load_priors(spec)
    except OSError as exc:
        raise UsageError(f"cannot read prior file {spec}: {exc.strerror}") from None
    except (PriorError, json.JSONDecodeError) as exc:
        raise UsageError(str(exc)) from None


def _sampler(args) -> SamplerConfig:
    try:
        return SamplerConfig(chains=args.chains, iterations=args.iters, warmup=args.warmup, seed=args.seed)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _row(label: str, s: PosteriorSummary) -> str:
    return f"{label}  Pr(HR > 1)={s.pr_hr_gt_1:.3f}  Median HR={s.median_hr:.3f}  95% CrI=({s.hr_2_5:.3f}, {s.hr_97_5:.3f})"


def _rhat_failures(summaries) -> list[str]:
    bad = []
    for label, s in summaries:
        d = s.diagnostics
        if d is not None and not d.rhat < RHAT_LIMIT:
            bad.append(f"{label}: R-hat={d.rhat:.4f} ESS={d.ess:.0f} acceptance={d.acceptance_rate:.3f}")
    return bad


def cmd_fit(args) -> int:
    data = _load_data(args.data)
    prior = _prior(args.prior)
    summary = analyze(data, prior, Ties(args.ties), Method(args.method), _sampler(args))
    record = summary.to_record(prior.label)
    text = json.dumps([record], indent=2) + "\n"
    if args.out:
        _write(text, args.out)
        print(_row(prior.label, summary))
    else:
        print(_row(prior.label, summary), file=sys.stderr)
        _write(text, None)
    bad = _rhat_failures([(prior.label, summary)])
    if bad:
        print("convergence warning (R-hat >= 1.01):\n  " + "\n  ".join(bad), file=sys.stderr)
        return EXIT_RHAT
    return EXIT_OK


def _format_for(args) -> Format:
    if args.format:
        return Format(args.format)
    if args.out and args.out.lower().endswith(".csv"):
        return Format.CSV
    if args.out and args.out.lower().endswith(".md"):
        return Format.MARKDOWN
    return Format.PLAIN


def cmd_sensitivity(args) -> int:
    data = _load_data(args.data)
    priors = _prior_set(args.priors)
    if not 0 < args.threshold < 1:
        raise UsageError("threshold must lie in (0, 1)")
    try:
        report = run_sensitivity(data, priors, Ties(args.ties), _sampler(args), Method(args.method), args.threshold)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    text = render_report(report, _format_for(args))
    verdict = "unanimous" if report.unanimous_decision else "not unanimous"
    footer = (
        f"spread_pr={report.spread_pr:.3f} spread_median={report.spread_median:.3f} "
        f"decision at threshold {args.threshold}: {verdict}\n"
    )
    if args.out:
        _write(text, args.out)
        sys.stdout.write(render_report(report, Format.PLAIN))
        sys.stdout.write(footer)
    else:
        sys.stdout.write(text)
        sys.stderr.write(footer)
    bad = _rhat_failures(report.rows)
    if bad:
        print("convergence warning (R-hat >= 1.01):\n  " + "\n  ".join(bad), file=sys.stderr)
        return EXIT_RHAT
    return EXIT_OK


def _fmt2(x: float) -> str:
    # two decimals, as in published prior tables; huge or tiny bounds in scientific form
    return f"{x:.2f}" if 0.005 <= x < 1e4 else f"{x:.2e}"


def cmd_priors(args) -> int:
    priors = [_prior(p) for p in args.prior] if args.prior else preset_priors()
    if args.action == "list":
        lines = [f"{'label':<24}{'kind':<16}{'mu':>8}{'sigma':>8}"]
        for p in priors:
            lines.append(f"{p.label:<24}{p.kind.value:<16}{p.mu:>8g}{p.sigma:>8g}")
    else:
        lines = [f"{'label':<24}{'median HR':>10}  95% HR interval"]
        for p in priors:
            s = prior_summary(p)
            lines.append(f"{p.label:<24}{_fmt2(s.median_hr):>10}  ({_fmt2(s.hr_lower_95)}, {_fmt2(s.hr_upper_95)})")
    print("\n".join(lines))
    return EXIT_OK


def cmd_elicit(args) -> int:
    if args.mock:
        provider = ProviderConfig(model_name=args.mock, mock=True)
    else:
        try:
            provider = ProviderConfig.from_file(args.provider)
        except OSError as exc:
            raise UsageError(f"cannot read provider file {args.provider}: {exc.strerror}") from None
        except json.JSONDecodeError as exc:
            raise UsageError(f"provider file is not valid JSON: {exc}") from None
    label = args.label or provider.model_name
    transcript_path = args.transcript or (str(Path(args.out).with_suffix(".transcript.txt")) if args.out else None)
    prompt = build_prompt()
    try:
        text, transcript = elicit_with_transcript(provider, prompt)
    except ElicitationError as exc:
        if exc.transcript and transcript_path:
            Path(transcript_path).write_text(exc.transcript, encoding="utf-8")
        raise
    # the transcript is persisted before any parsing
    if transcript_path:
        Path(transcript_path).write_text(transcript, encoding="utf-8")
    result = parse_response(text, label)
    _write(dump_priors([result.informative, result.noninformative]), args.out)
    for w in sanity_check(result):
        print(f"sanity check: {w}", file=sys.stderr)
    return EXIT_OK


def cmd_simulate(args) -> int:
    try:
        cfg = SimulationConfig(
            n_crt=args.n_crt,
            n_hfrt=args.n_hfrt,
            true_log_hr=args.log_hr,
            baseline_shape=args.shape,
            baseline_scale=args.scale,
            censor_rate=args.censor_rate,
            seed=args.seed,
        )
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    _write(write_csv(simulate(cfg)), args.out)
    return EXIT_OK


def cmd_plot_priors(args) -> int:
    priors = _prior_set(args.priors)
    if not 0 < args.hr_min < args.hr_max:
        raise UsageError("need 0 < hr-min < hr-max")
    if args.points < 2:
        raise UsageError("points must be at least 2")
    fmt = args.format or ("svg" if args.out and args.out.lower().endswith(".svg") else "csv")
    render = curves_svg if fmt == "svg" else curves_csv
    _write(render(priors, args.hr_min, args.hr_max, args.points), args.out)
    return EXIT_OK


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="coxprior", description="Bayesian Cox analysis with log-normal hazard-ratio priors.",
                formatter_class=fmt)
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def sampler_flags(sp):
        sp.add_argument("--method", choices=[m.value for m in Method], default=Method.QUADRATURE.value,
                        help="posterior computation")
        sp.add_argument("--ties", choices=[t.value for t in Ties], default=Ties.BRESLOW.value,
                        help="tied event-time handling")
        sp.add_argument("--chains", type=int, default=4, help="MCMC chains")
        sp.add_argument("--iters", type=int, default=5000, help="post-warmup draws per chain")
        sp.add_argument("--warmup", type=int, default=2000, help="warmup iterations per chain")
        sp.add_argument("--seed", type=int, default=0, help="MCMC master seed")

    f = sub.add_parser("fit", help="posterior summary under one prior", formatter_class=fmt)
    f.add_argument("--data", required=True, help="CSV with group,time_os_months,event")
    f.add_argument("--prior", required=True, help="lognormal:MU,SIGMA or a preset name")
    sampler_flags(f)
    f.add_argument("--out", default=None, help="summary JSON file (stdout if omitted)")
    f.set_defaults(func=cmd_fit)

    s = sub.add_parser("sensitivity", help="compare posteriors across priors", formatter_class=fmt)
    s.add_argument("--data", required=True, help="CSV with group,time_os_months,event")
    s.add_argument("--priors", default="all", help="'all' for the six presets, or a prior JSON file")
    sampler_flags(s)
    s.add_argument("--threshold", type=float, default=0.95, help="decision threshold on Pr(HR > 1)")
    s.add_argument("--format", choices=[x.value for x in Format], default=None,
                   help="report format (default: from --out extension, else plain)")
    s.add_argument("--out", default=None, help="report file (stdout if omitted)")
    s.set_defaults(func=cmd_sensitivity)

    pr = sub.add_parser("priors", help="list or summarise priors", formatter_class=fmt)
    pr.add_argument("action", choices=["list", "summarize"])
    pr.add_argument("--prior", action="append", default=None,
                    help="prior literal or preset name (repeatable; default all presets)")
    pr.set_defaults(func=cmd_priors)

    e = sub.add_parser("elicit", help="elicit priors from a chat model", formatter_class=fmt)
    src = e.add_mutually_exclusive_group(required=True)
    src.add_argument("--provider", help="provider JSON config file")
    src.add_argument("--mock", choices=MOCK_MODELS, help="use a bundled canned response")
    e.add_argument("--label", default=None, help="prior label prefix (default: model name)")
    e.add_argument("--transcript", default=None, help="transcript file (default: next to --out)")
    e.add_argument("--out", default=None, help="prior JSON file (stdout if omitted)")
    e.set_defaults(func=cmd_elicit)

    sm = sub.add_parser("simulate", help="generate a synthetic two-arm dataset", formatter_class=fmt)
    sm.add_argument("--n-crt", type=int, default=8, help="CRT subjects")
    sm.add_argument("--n-hfrt", type=int, default=20, help="HFRT subjects")
    sm.add_argument("--log-hr", type=float, default=0.0, help="true log hazard ratio")
    sm.add_argument("--shape", type=float, default=1.5, help="Weibull baseline shape")
    sm.add_argument("--scale", type=float, default=18.0, help="Weibull baseline scale (months)")
    sm.add_argument("--censor-rate", type=float, default=0.2, help="expected censored fraction")
    sm.add_argument("--seed", type=int, default=0, help="random seed")
    sm.add_argument("--out", default=None, help="CSV file (stdout if omitted)")
    sm.set_defaults(func=cmd_simulate)

    pp = sub.add_parser("plot-priors", help="prior density curves on the HR scale", formatter_class=fmt)
    pp.add_argument("--priors", default="all", help="'all' or a prior JSON file")
    pp.add_argument("--hr-min", type=float, default=0.01, help="smallest HR")
    pp.add_argument("--hr-max", type=float, default=5.0, help="largest HR")
    pp.add_argument("--points", type=int, default=500, help="grid points per curve")
    pp.add_argument("--format", choices=["csv", "svg"], default=None,
                    help="output format (default: from --out extension, else csv)")
    pp.add_argument("--out", default=None, help="output file (stdout if omitted)")
    pp.set_defaults(func=cmd_plot_priors)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"coxprior {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except DataError as exc:
        print(f"coxprior {args.command}: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (InferenceError, ElicitationError) as exc:
        print(f"coxprior {args.command}: {exc}", file=sys.stderr)
        return EXIT_INFERENCE


if __name__ == "__main__":
    sys.exit(main())
