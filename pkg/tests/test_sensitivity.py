import itertools

import pytest

from coxprior.inference import InferenceError, Method, PosteriorSummary, SamplerConfig, quadrature_posterior
from coxprior.priors import LogHrPrior, preset_priors
from coxprior.sensitivity import (
    COLUMNS,
    Format,
    SensitivityReport,
    decision,
    parse_report_csv,
    render_report,
    run_sensitivity,
    spread,
)

from .conftest import trial_like


def summary(pr, med=2.0, lo=1.0, hi=4.0):
    return PosteriorSummary(pr, med, lo, hi, Method.QUADRATURE)


def test_single_prior_has_zero_spread():
    rep = run_sensitivity(trial_like(1), [LogHrPrior(0, 1, "only")])
    assert rep.spread_pr == 0 and rep.spread_median == 0
    assert rep.unanimous_decision


def test_spread_of_published_column():
    rows = tuple((f"p{i}", summary(p)) for i, p in enumerate([0.974, 0.977, 0.975, 0.975]))
    assert SensitivityReport(rows).spread_pr == pytest.approx(0.003, abs=1e-12)


def test_spreads_match_pairwise_recomputation():
    ds = trial_like(7)
    priors = [LogHrPrior(0, 1, "n1"), LogHrPrior(0, 2, "n2")]
    rep = run_sensitivity(ds, priors, method=Method.QUADRATURE)
    a, b = (quadrature_posterior(ds, p) for p in priors)
    assert rep.spread_pr == abs(a.pr_hr_gt_1 - b.pr_hr_gt_1)
    assert rep.spread_median == abs(a.median_hr - b.median_hr)


def test_rows_keep_input_order_and_spreads_are_permutation_invariant():
    ds = trial_like(2)
    priors = preset_priors()[:4]
    rep = run_sensitivity(ds, priors)
    assert [label for label, _ in rep.rows] == [p.label for p in priors]
    for perm in itertools.islice(itertools.permutations(priors), 5):
        other = run_sensitivity(ds, list(perm))
        assert other.spread_pr == rep.spread_pr
        assert other.spread_median == rep.spread_median


def test_duplicate_labels_rejected():
    with pytest.raises(ValueError, match="duplicate"):
        run_sensitivity(trial_like(1), [LogHrPrior(0, 1, "x"), LogHrPrior(0, 2, "x")])
    with pytest.raises(ValueError):
        run_sensitivity(trial_like(1), [])


def test_failing_prior_is_named():
    with pytest.raises(InferenceError, match="'short'"):
        run_sensitivity(trial_like(1), [LogHrPrior(0, 1, "short")], method=Method.MCMC,
                        config=SamplerConfig(iterations=10, warmup=10))


def test_mcmc_mode_carries_diagnostics():
    rep = run_sensitivity(trial_like(3), [LogHrPrior(0, 1, "a")], method=Method.MCMC, config=SamplerConfig(seed=2))
    assert rep.rows[0][1].diagnostics.rhat < 1.01


@pytest.mark.parametrize(
    "prs, unanimous",
    [([0.97, 0.99], True), ([0.97, 0.90], False), ([0.01, 0.02], True), ([0.5, 0.6], True), ([0.01, 0.97], False)],
)
def test_unanimity(prs, unanimous):
    rep = SensitivityReport(tuple((str(i), summary(p)) for i, p in enumerate(prs)), 0.95)
    assert rep.unanimous_decision is unanimous
    assert rep.unanimous_decision == (len({decision(p, 0.95) for p in prs}) == 1)


def test_spread_helper():
    assert spread([]) == 0 and spread([0.4]) == 0 and spread([0.2, 0.9, 0.5]) == pytest.approx(0.7)


def test_render_exact_digits():
    rep = SensitivityReport((("ChatGPT", PosteriorSummary(0.977, 2.740, 1.016, 9.605, Method.MCMC)),))
    for fmt in Format:
        text = render_report(rep, fmt)
        for cell in ("0.977", "2.740", "1.016", "9.605"):
            assert cell in text
    plain = render_report(rep, Format.PLAIN).splitlines()
    assert len(plain) == 3  # header, rule, one data row
    header = plain[0]
    assert [header.index(c) for c in COLUMNS] == sorted(header.index(c) for c in COLUMNS)


def test_csv_round_trip():
    rep = run_sensitivity(trial_like(4), preset_priors())
    rows = parse_report_csv(render_report(rep, Format.CSV))
    assert [r["Prior"] for r in rows] == [label for label, _ in rep.rows]
    for r, (_, s) in zip(rows, rep.rows):
        assert r["Pr(HR > 1)"] == round(s.pr_hr_gt_1, 3)
        assert r["Median HR"] == round(s.median_hr, 3)
        assert r["97.5%"] == round(s.hr_97_5, 3)


def test_markdown_layout():
    rep = SensitivityReport((("a", summary(0.5)), ("b", summary(0.6))))
    lines = render_report(rep, Format.MARKDOWN).splitlines()
    assert lines[0].startswith("| Prior | Pr(HR > 1) |") and len(lines) == 4
