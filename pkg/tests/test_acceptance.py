"""Acceptance suite: one test per criterion, each printing a pass/fail line.

Run with `pytest tests/test_acceptance.py -v -s` to see the per-criterion
lines and timings.  The heavy three-dimensional runs (criteria 6, 8, 9)
share cached results through module-scoped fixtures.
"""

import time
from contextlib import contextmanager

import numpy as np
import pytest

from csgs import (
    FieldPair,
    GridSpec,
    PotentialDef,
    ProblemSpec,
    SolveOptions,
    aubin_talenti_bubble,
    build_grid,
    compare_energies,
    coupling_sign_value,
    energy,
    energy_gradient,
    estimate_sobolev_constant,
    lp_integral,
    minimize_ground_state,
    nonneg_refine,
    pair_invariants,
    pohozaev_residual,
    quadratic_form,
    read_field,
    sample_potentials,
    sobolev_quotient,
    sweep_mu,
    translate_lattice,
    validate_assumptions,
    write_field,
)
from csgs.cli import run_cli
from csgs.fieldio import fmt_float, read_csv_rows
from csgs.functional import pair_inner, pair_norm_e_sq
from csgs.nehari import fibering_scale_from_invariants, nehari_project

from conftest import random_pair

CONST = PotentialDef.constant


@contextmanager
def criterion(num, name, budget_s=None):
    t0 = time.time()
    try:
        yield
    except BaseException:
        print(f"\n[criterion {num:2d}] {name}: FAIL ({time.time() - t0:.1f}s)")
        raise
    elapsed = time.time() - t0
    print(f"\n[criterion {num:2d}] {name}: PASS ({elapsed:.1f}s)")
    if budget_s is not None:
        assert elapsed < budget_s, f"runtime {elapsed:.1f}s exceeded budget {budget_s}s"


def _validated_sets():
    """Five validated potential sets, including the delta = 0.9 stress case
    and two exact-equality couplings."""
    g1 = build_grid(GridSpec(1, 4.0, 64))
    g2 = build_grid(GridSpec(2, 2.0, 16))
    g3 = build_grid(GridSpec(3, 2.0, 8))
    sets = []

    ps = sample_potentials((CONST(1.0), CONST(1.0), CONST(0.9)), 0.9, g1)
    assert validate_assumptions(ps, "periodic").overall
    sets.append(ps)

    ps = sample_potentials((CONST(1.0), CONST(4.0), CONST(-1.0)), 0.5, g1)
    assert validate_assumptions(ps, "periodic").overall
    sets.append(ps)

    # 2d lattice wells: both reach their minimum 0.5, where the bound is
    # delta * 0.5 = 0.25 and the constant coupling 0.2 still clears it
    ps = sample_potentials(
        (PotentialDef.cosine_lattice(1.5, 0.5), PotentialDef.cosine_lattice(2.5, 1.0), CONST(0.2)),
        0.5,
        g2,
    )
    assert validate_assumptions(ps, "periodic").overall
    sets.append(ps)

    # harmonic wells with the opposing quadratic coupling: equality at every node
    ps = sample_potentials(
        (
            PotentialDef.radial_quadratic(0.5),
            PotentialDef.radial_quadratic(0.5),
            PotentialDef.radial_quadratic(-0.25),
        ),
        0.5,
        g3,
    )
    assert validate_assumptions(ps, "nonexistence").overall
    sets.append(ps)

    ref = sample_potentials((CONST(2.0), CONST(2.0), CONST(0.4)), 0.5, g1)
    asym = sample_potentials(
        (
            PotentialDef.gaussian(2.0, -0.5, 1.0),
            PotentialDef.gaussian(2.0, -0.5, 1.0),
            PotentialDef.gaussian(0.4, 0.1, 1.0),
        ),
        0.5,
        g1,
    )
    assert validate_assumptions(asym, "asymptotic", reference=ref).overall
    sets.append(asym)
    return sets


def test_criterion_1_coercivity():
    with criterion(1, "coercivity of the coupled quadratic form", budget_s=5.0):
        failures = 0
        for ps in _validated_sets():
            g = ps.grid
            for seed in range(200):
                fp = random_pair(g, seed)
                b = quadratic_form(fp, ps, g)
                norm_sq = pair_norm_e_sq(fp, ps, g)
                if b < (1.0 - ps.delta) * norm_sq - 1e-12 * max(1.0, norm_sq):
                    failures += 1
        assert failures == 0


def test_criterion_2_fibering():
    with criterion(2, "fibering uniqueness, maximality, projection residual", budget_s=10.0):
        g = build_grid(GridSpec(1, 1.0, 64))
        ps = sample_potentials((CONST(1.0), CONST(1.0), CONST(0.3)), 0.5, g)
        spec = ProblemSpec(1, 3.0, 5.0, 1.0)
        ts = np.logspace(-3, 3, 1024)
        for seed in range(100):
            fp = random_pair(g, seed)
            inv = pair_invariants(fp, ps, spec, g)
            phi = ts ** (spec.p - 2) * inv.pnorm_mu + ts ** (spec.q - 2) * inv.qnorm - inv.quad
            signs = np.sign(phi)
            assert np.count_nonzero(np.diff(signs[signs != 0])) == 1

            diag = fibering_scale_from_invariants(inv, spec)
            best = inv.energy_at(diag.t_mu, spec)
            scales = np.logspace(np.log10(diag.t_mu / 100), np.log10(diag.t_mu * 100), 64)
            assert all(best >= inv.energy_at(t, spec) - 1e-12 * max(1.0, abs(best)) for t in scales)

            proj = fp.scaled(diag.t_mu)
            inv_p = pair_invariants(proj, ps, spec, g)
            resid = inv_p.quad - inv_p.pnorm_mu - inv_p.qnorm
            assert abs(resid) <= 1e-10 * max(1.0, inv_p.quad)

        # closed form for the pure quartic case
        spec44 = ProblemSpec(1, 4.0, 4.0, 1.0)
        for seed in range(50):
            inv = pair_invariants(random_pair(g, seed), ps, spec44, g)
            expected = np.sqrt(inv.quad / (inv.pnorm_mu + inv.qnorm))
            got = fibering_scale_from_invariants(inv, spec44).t_mu
            assert abs(got - expected) <= 1e-12 * max(1.0, expected)

        # mixed-exponent scalar root: t + t^2 = 1
        from csgs.functional import PairInvariants

        spec34 = ProblemSpec(1, 3.0, 4.0, 1.0)
        diag = fibering_scale_from_invariants(PairInvariants(1.0, 0.0, 1.0, 1.0), spec34)
        assert abs(diag.t_mu - (np.sqrt(5.0) - 1.0) / 2.0) <= 1e-10


def test_criterion_3_gradient_consistency():
    with criterion(3, "gradient consistency against central differences", budget_s=10.0):
        g = build_grid(GridSpec(1, 1.0, 64))
        ps = sample_potentials((CONST(1.0), CONST(1.0), CONST(0.4)), 0.5, g)
        specs = [ProblemSpec(1, 4.0, 4.0, 1.0), ProblemSpec(1, 3.0, 4.5, 0.7)]
        eps = 1e-5
        for trial in range(100):
            spec = specs[trial % 2]
            fp = random_pair(g, trial, smooth=True)
            d = random_pair(g, 1000 + trial, smooth=True)
            pairing = pair_inner(energy_gradient(fp, ps, spec, g), d, g)
            plus = energy(FieldPair(fp.u + eps * d.u, fp.v + eps * d.v, g), ps, spec, g).total
            minus = energy(FieldPair(fp.u - eps * d.u, fp.v - eps * d.v, g), ps, spec, g).total
            fd = (plus - minus) / (2.0 * eps)
            assert abs(fd - pairing) <= 1e-6 * max(1.0, abs(pairing))


@pytest.fixture(scope="module")
def ground_state_run():
    g = build_grid(GridSpec(1, 4.0, 128))
    ps = sample_potentials((CONST(1.0), CONST(1.0), CONST(0.3)), 0.3, g)
    assert validate_assumptions(ps, "periodic-strict").overall
    spec = ProblemSpec(1, 4.0, 4.0, 1.0)
    report = minimize_ground_state(ps, spec, g)
    return g, ps, spec, report


def test_criterion_4_subcritical_ground_state(ground_state_run):
    with criterion(4, "subcritical ground state: convergence, seeds, positivity", budget_s=60.0):
        g, ps, spec, report = ground_state_run
        assert report.converged and report.grad_norm <= 1e-6
        assert report.energy > 0
        assert all(b <= a for a, b in zip(report.energy_trace, report.energy_trace[1:]))

        energies = [report.energy]
        for seed in range(5):
            r = minimize_ground_state(ps, spec, g, SolveOptions(init="random", seed=seed))
            assert r.converged
            energies.append(r.energy)
        assert max(energies) - min(energies) <= 1e-6

        refined = nonneg_refine(report, ps, spec, g)
        assert abs(refined.energy - report.energy) <= 1e-10
        assert np.all(refined.field.u > 0.0)
        assert np.all(refined.field.v > 0.0)


def test_criterion_5_energy_level_positivity(ground_state_run):
    with criterion(5, "energy level dominates the coercive norm bound"):
        g, ps, spec, report = ground_state_run
        reports = [(report, ps, spec, g)]

        g2 = build_grid(GridSpec(1, 4.0, 64))
        ps2 = sample_potentials((CONST(1.0), CONST(1.0), CONST(0.9)), 0.9, g2)
        validate_assumptions(ps2, "periodic")
        for p, q, mu in ((4.0, 4.0, 1.0), (3.0, 4.0, 2.0), (2.5, 6.0, 0.5)):
            spec2 = ProblemSpec(1, p, q, mu)
            rep = minimize_ground_state(ps2, spec2, g2, SolveOptions(max_iters=4000))
            reports.append((rep, ps2, spec2, g2))

        for rep, pset, sp, grd in reports:
            if not rep.converged:
                continue
            floor = (0.5 - 1.0 / sp.p) * (1.0 - pset.delta) * rep.field_norm_e_sq
            assert rep.energy >= floor - 1e-9
            assert rep.energy > 0


@pytest.fixture(scope="module")
def sobolev_estimates():
    values = {}
    for n in (48, 64, 96):
        g = build_grid(GridSpec(3, 8.0, n, "periodic", "fd2"))
        values[n] = (
            estimate_sobolev_constant(g),
            sobolev_quotient(aubin_talenti_bubble(g), g),
        )
    return values


def test_criterion_8_sobolev_constant(sobolev_estimates):
    with criterion(8, "sharp embedding constant: bubble agreement and drift", budget_s=300.0):
        for n, (s_opt, s_bubble) in sobolev_estimates.items():
            assert abs(s_opt - s_bubble) <= 0.05 * s_bubble, f"n={n}"
        drift_64 = abs(sobolev_estimates[64][0] - sobolev_estimates[48][0])
        drift_96 = abs(sobolev_estimates[96][0] - sobolev_estimates[64][0])
        assert drift_96 < drift_64
        # scaling invariance of the quotient itself
        g = build_grid(GridSpec(3, 8.0, 48, "periodic", "fd2"))
        u = aubin_talenti_bubble(g)
        assert sobolev_quotient(2.0 * u, g) == pytest.approx(sobolev_quotient(u, g), rel=1e-12)


def test_criterion_6_mu_sweep_threshold(sobolev_estimates):
    with criterion(6, "monotone mu sweep with compactness threshold", budget_s=900.0):
        s_const = sobolev_estimates[64][0]
        g = build_grid(GridSpec(3, 6.0, 48))
        ps = sample_potentials((CONST(1.0), CONST(1.0), CONST(0.9)), 0.9, g)
        assert validate_assumptions(ps, "periodic").overall
        spec = ProblemSpec(3, 4.0, 6.0, 1.0)
        mus = [0.5, 1.0, 2.0, 4.0, 8.0, 16.0]
        sweep = sweep_mu(ps, spec, g, mus, SolveOptions(), sobolev_constant=s_const)

        assert all(sweep.converged)
        assert all(b < a for a, b in zip(sweep.energies, sweep.energies[1:]))
        assert sweep.threshold == pytest.approx(s_const**1.5 / 3.0)
        assert sweep.mu0_estimate is not None
        assert min(sweep.energies) < sweep.threshold

        # cold starts reproduce the sweep energies
        for mu, c_sweep in zip(mus, sweep.energies):
            cold = minimize_ground_state(ps, spec.with_mu(mu), g, SolveOptions())
            assert cold.converged
            assert abs(cold.energy - c_sweep) <= 1e-5 * max(1.0, abs(c_sweep))


def test_criterion_7_periodic_vs_asymptotic():
    with criterion(7, "asymptotic ground level sits below the periodic one", budget_s=180.0):
        g = build_grid(GridSpec(1, 4.0, 128))
        ref = sample_potentials((CONST(2.0), CONST(2.0), CONST(0.4)), 0.5, g)
        assert validate_assumptions(ref, "periodic").overall
        asym = sample_potentials(
            (
                PotentialDef.gaussian(2.0, -0.5, 1.0),
                PotentialDef.gaussian(2.0, -0.5, 1.0),
                PotentialDef.gaussian(0.4, 0.1, 1.0),
            ),
            0.5,
            g,
        )
        assert validate_assumptions(asym, "asymptotic", reference=ref).overall
        spec = ProblemSpec(1, 4.0, 4.0, 1.0)
        for seed in range(3):
            opts = SolveOptions(init="random", seed=seed)
            r_per = minimize_ground_state(ref, spec, g, opts)
            r_asym = minimize_ground_state(asym, spec, g, opts)
            assert r_per.converged and r_asym.converged
            cmp = compare_energies(r_per, r_asym)
            assert cmp.passed and cmp.gap > 1e-9


def test_criterion_9_pohozaev_refinement():
    with criterion(9, "dilation-identity residual refines under the grid", budget_s=300.0):
        # concentrated member of the extremal family: keeps the truncation
        # flux through the box walls subdominant to discretization error,
        # so refinement in n is visible in the balance
        scale = 0.4
        spec = ProblemSpec(3, 6.0, 6.0, 0.0)
        rels = []
        for n in (48, 64, 96):
            g = build_grid(GridSpec(3, 12.0, n))
            ps = sample_potentials((CONST(0.0), CONST(0.0), CONST(0.0)), 0.5, g)
            fp = FieldPair(np.zeros(g.shape), aubin_talenti_bubble(g, scale), g)
            rep = pohozaev_residual(fp, ps, spec, g)
            assert sum(rep.terms.values()) == pytest.approx(rep.rhs, rel=1e-13)
            rels.append(rep.relative)
        assert rels[0] > rels[1] > rels[2], rels
        assert rels[0] / rels[2] >= 2.0, rels


def test_criterion_10_sign_constraint():
    with criterion(10, "discrete-exact sign of the coupling form"):
        failures = 0
        for ps in _validated_sets():
            g = ps.grid
            for seed in range(200):
                fp = random_pair(g, seed)
                q = coupling_sign_value(fp, ps, g)
                scale = lp_integral(fp.u, 2, g) * float(np.max(ps.v1)) + lp_integral(
                    fp.v, 2, g
                ) * float(np.max(ps.v2))
                if q < -1e-12 * max(1.0, scale):
                    failures += 1
        assert failures == 0


def test_criterion_11_translation_and_sign_neutrality():
    with criterion(11, "lattice-shift and sign-flip neutrality"):
        g = build_grid(GridSpec(1, 4.0, 128))
        ps = sample_potentials((CONST(1.0), CONST(1.0), CONST(0.3)), 0.3, g)
        validate_assumptions(ps, "periodic")
        spec = ProblemSpec(1, 4.0, 4.0, 1.0)
        w = np.exp(-g.radius_sq / 2.0)
        base = FieldPair(0.9 * w, 1.1 * w, g)
        r0 = minimize_ground_state(ps, spec, g, init_field=base)
        shifted = FieldPair(
            translate_lattice(base.u, (2,), g), translate_lattice(base.v, (2,), g), g
        )
        r1 = minimize_ground_state(ps, spec, g, init_field=shifted)
        r2 = minimize_ground_state(ps, spec, g, init_field=base.scaled(-1.0))
        assert r0.converged and r1.converged and r2.converged
        assert abs(r0.energy - r1.energy) <= 1e-8
        assert abs(r0.energy - r2.energy) <= 1e-8

        for p in (2.0, spec.p, spec.q):
            f = random_pair(g, 17).u
            assert lp_integral(translate_lattice(f, (3,), g), p, g) == lp_integral(f, p, g)


def test_criterion_12_persistence(tmp_path):
    with criterion(12, "field files, CSV floats, CLI exit codes"):
        # bit-exact field round trip
        g = build_grid(GridSpec(2, 2.0, 16))
        fp = random_pair(g, 23)
        write_field(fp, tmp_path / "f.csgs")
        back = read_field(tmp_path / "f.csgs")
        assert np.array_equal(back.u, fp.u) and np.array_equal(back.v, fp.v)

        # CSV floats re-parse to the exact double
        rng = np.random.default_rng(3)
        for x in list(rng.standard_normal(200)) + [1e-300, 1e300, np.pi]:
            assert float(fmt_float(x)) == float(x)

        # CLI exit codes on the three reference configs
        from test_cli_io import BASE_CFG, MODEL_PAIR_CFG

        cfg_ok = tmp_path / "model.cfg"
        cfg_ok.write_text(MODEL_PAIR_CFG, encoding="utf-8")
        assert run_cli(["validate", "--config", str(cfg_ok), "--out", str(tmp_path / "o1")]) == 0

        cfg_budget = tmp_path / "budget.cfg"
        cfg_budget.write_text(
            BASE_CFG.replace("max_iters = 2000", "max_iters = 0"), encoding="utf-8"
        )
        assert run_cli(["solve", "--config", str(cfg_budget), "--out", str(tmp_path / "o2")]) == 3
        assert (tmp_path / "o2" / "solve_trace.csv").exists()

        cfg_empty = tmp_path / "empty.cfg"
        cfg_empty.write_text(BASE_CFG + "\n[sweep]\nmu_values =\n", encoding="utf-8")
        assert run_cli(["sweep", "--config", str(cfg_empty), "--out", str(tmp_path / "o3")]) == 1
