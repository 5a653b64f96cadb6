"""Risk formulas against per-row loop oracles and the theory identities."""

import numpy as np
import pytest

from causalselect import (
    DataError,
    Dataset,
    FunctionOutcomeModel,
    SimConfig,
    bayes_residuals,
    check_reweighting_identity,
    check_upper_bound,
    evaluate_candidates,
    mu_risk,
    mu_risk_ipw,
    oracle_model,
    oracle_nuisances,
    r_risk,
    simulate,
    tau_risk,
    tau_risk_ipw,
    u_risk,
)
from causalselect.nuisance import NuisancePair
from causalselect.risks import RiskTable


class _TableModel:
    """Predicts preset values row-aligned with a fixed evaluation set."""

    id = "table"

    def __init__(self, obs, effects):
        self.obs = np.asarray(obs, dtype=float)
        self.effects = np.asarray(effects, dtype=float)

    def predict(self, x, a):
        return self.obs[: x.shape[0]]

    def cate(self, x):
        return self.effects[: x.shape[0]]


class _FixedNuisance(NuisancePair):
    """Nuisance pair returning preset per-row vectors."""

    def __init__(self, e, m, eta=1e-10):
        super().__init__(e_hat=None, m_hat=None, eta_clip=eta, provenance="fixed")
        self._e = np.asarray(e, dtype=float)
        self._m = np.asarray(m, dtype=float)

    def propensity(self, data):
        return np.clip(self._e, self.eta_clip, 1 - self.eta_clip)

    def mean_outcome(self, data):
        return self._m


def _simulated(seed=0, n=400, theta=1.0, sigma=None, p_a=0.5):
    return simulate(SimConfig(seed=seed, n=n, theta=theta, sigma_noise=sigma, p_a=p_a))


def _random_model(seed, data):
    rng = np.random.default_rng(seed)
    w_obs = rng.standard_normal(3)
    w_eff = rng.standard_normal(3)
    obs = data.x @ w_obs[:2] + w_obs[2]
    eff = data.x @ w_eff[:2] + w_eff[2]
    return _TableModel(obs, eff)


# ---------------------------------------------------------------------------
# individual risks against analytic cases and loop oracles
# ---------------------------------------------------------------------------


def test_tau_risk_zero_for_oracle_model():
    data = _simulated(seed=1)
    assert tau_risk(oracle_model(data), data) == 0.0


def test_tau_risk_constant_offset():
    data = _simulated(seed=2)
    shifted = FunctionOutcomeModel(
        mu0_fn=data.truth.mu0, mu1_fn=lambda x: data.truth.mu1(x) + 1.0
    )
    assert tau_risk(shifted, data) == pytest.approx(1.0, abs=1e-12)


def test_tau_risk_needs_oracle():
    data = Dataset(x=np.zeros((3, 2)), a=np.zeros(3, dtype=np.int64), y=np.zeros(3))
    with pytest.raises(DataError):
        tau_risk(_TableModel(np.zeros(3), np.zeros(3)), data)


def test_mu_risk_memorizing_and_constant():
    data = _simulated(seed=3, n=100)
    assert mu_risk(_TableModel(data.y, np.zeros(100)), data) == 0.0
    tiny = Dataset(
        x=np.zeros((2, 2)), a=np.array([0, 1]), y=np.array([1.0, -1.0])
    )
    assert mu_risk(_TableModel(np.zeros(2), np.zeros(2)), tiny) == pytest.approx(1.0)


def test_mu_risk_zero_noise_oracle_pair():
    data = _simulated(seed=4, sigma=0.0)
    assert mu_risk(oracle_model(data), data) < 1e-12


def test_mu_risk_ipw_half_propensity_doubles_mu_risk():
    data = _simulated(seed=5, n=150)
    model = _random_model(50, data)
    pair = _FixedNuisance(np.full(150, 0.5), np.zeros(150))
    assert mu_risk_ipw(model, data, pair) == 2.0 * mu_risk(model, data)


def test_mu_risk_ipw_randomized_form():
    # with constant propensity the weights reduce to a/p + (1-a)/(1-p)
    data = _simulated(seed=6, n=200, theta=0.0, p_a=0.3)
    model = _random_model(51, data)
    pair = oracle_nuisances(data)
    direct = np.mean(
        (data.a / 0.3 + (1 - data.a) / 0.7) * (data.y - model.predict(data.x, data.a)) ** 2
    )
    assert mu_risk_ipw(model, data, pair) == pytest.approx(direct, rel=1e-12)


def test_tau_risk_ipw_single_row_identity():
    data = Dataset(x=np.zeros((1, 2)), a=np.array([1]), y=np.array([2.0]))
    pair = _FixedNuisance(np.array([0.5]), np.array([0.0]))
    model = _TableModel(np.zeros(1), np.array([4.0]))
    assert tau_risk_ipw(model, data, pair) == 0.0


def test_tau_risk_ipw_zero_effect_mean_pseudo_squared():
    data = _simulated(seed=7, n=120)
    pair = oracle_nuisances(data)
    model = _TableModel(np.zeros(120), np.zeros(120))
    e = pair.propensity(data)
    pseudo = data.y * (data.a / e - (1 - data.a) / (1 - e))
    assert tau_risk_ipw(model, data, pair) == pytest.approx(np.mean(pseudo**2), rel=1e-12)


def test_u_risk_zero_numerator():
    data = _simulated(seed=8, n=80)
    pair = _FixedNuisance(np.full(80, 0.4), data.y)  # y equals the mean outcome
    model = _random_model(52, data)
    effects = model.cate(data.x)
    assert u_risk(model, data, pair) == pytest.approx(np.mean(effects**2), rel=1e-12)


def test_u_risk_single_row_exact_ratio():
    data = Dataset(x=np.zeros((1, 2)), a=np.array([1]), y=np.array([3.0]))
    pair = _FixedNuisance(np.array([0.25]), np.array([1.5]))
    model = _TableModel(np.zeros(1), np.array([2.0]))  # (3 - 1.5) / 0.75 = 2
    assert u_risk(model, data, pair) == pytest.approx(0.0, abs=1e-24)


def test_r_risk_zero_when_residuals_vanish():
    n = 60
    rng = np.random.default_rng(9)
    x = rng.standard_normal((n, 2))
    a = (rng.random(n) < 0.5).astype(np.int64)
    m = x[:, 0]
    data = Dataset(x=x, a=a, y=m.copy())
    pair = _FixedNuisance(a.astype(float), m)  # y = m and a = e rowwise
    model = _random_model(53, data)
    # clipping nudges e off {0, 1} by eta, leaving an O(eta^2) residue
    assert r_risk(model, data, pair) == pytest.approx(0.0, abs=1e-18)


def test_r_risk_zero_noise_oracle_everything():
    data = _simulated(seed=10, sigma=0.0)
    assert r_risk(oracle_model(data), data, oracle_nuisances(data)) < 1e-10


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_all_risks_match_loop_oracles(seed):
    data = _simulated(seed=seed, n=90, theta=1.2, p_a=0.4)
    model = _random_model(seed + 60, data)
    pair = oracle_nuisances(data)
    e = pair.propensity(data)
    m = pair.mean_outcome(data)
    obs = model.predict(data.x, data.a)
    eff = model.cate(data.x)
    n = data.n

    loops = {name: 0.0 for name in ("tau", "mu", "mu_ipw", "tau_ipw", "u", "r")}
    for i in range(n):
        w = data.a[i] / e[i] + (1 - data.a[i]) / (1 - e[i])
        pseudo = data.y[i] * (data.a[i] / e[i] - (1 - data.a[i]) / (1 - e[i]))
        loops["tau"] += (data.cate[i] - eff[i]) ** 2 / n
        loops["mu"] += (data.y[i] - obs[i]) ** 2 / n
        loops["mu_ipw"] += w * (data.y[i] - obs[i]) ** 2 / n
        loops["tau_ipw"] += (pseudo - eff[i]) ** 2 / n
        loops["u"] += ((data.y[i] - m[i]) / (data.a[i] - e[i]) - eff[i]) ** 2 / n
        loops["r"] += ((data.y[i] - m[i]) - (data.a[i] - e[i]) * eff[i]) ** 2 / n

    assert tau_risk(model, data) == pytest.approx(loops["tau"], rel=1e-12)
    assert mu_risk(model, data) == pytest.approx(loops["mu"], rel=1e-12)
    assert mu_risk_ipw(model, data, pair) == pytest.approx(loops["mu_ipw"], rel=1e-12)
    assert tau_risk_ipw(model, data, pair) == pytest.approx(loops["tau_ipw"], rel=1e-12)
    assert u_risk(model, data, pair) == pytest.approx(loops["u"], rel=1e-12)
    assert r_risk(model, data, pair) == pytest.approx(loops["r"], rel=1e-12)


def test_risks_invariant_under_row_permutation():
    data = _simulated(seed=11, n=70)
    model = _random_model(70, data)
    pair = oracle_nuisances(data)
    perm = np.random.default_rng(0).permutation(70)
    shuffled = data.subset(perm)
    shuffled_model = _TableModel(
        model.predict(data.x, data.a)[perm], model.cate(data.x)[perm]
    )
    for risk in (mu_risk_ipw, tau_risk_ipw, u_risk, r_risk):
        assert risk(model, data, pair) == pytest.approx(
            risk(shuffled_model, shuffled, oracle_nuisances(shuffled)), rel=1e-12
        )
    assert tau_risk(model, data) == pytest.approx(tau_risk(shuffled_model, shuffled), rel=1e-12)


# ---------------------------------------------------------------------------
# noise constants
# ---------------------------------------------------------------------------


def test_bayes_residuals_zero_noise():
    data = _simulated(seed=12, sigma=0.0)
    res = bayes_residuals(data)
    assert res.sigma_b_sq == (0.0, 0.0)
    assert res.sigma_b_tilde_sq == (0.0, 0.0)


def test_bayes_residuals_randomized_half():
    data = _simulated(seed=13, theta=0.0, p_a=0.5, sigma=1.0)
    res = bayes_residuals(data)
    assert res.sigma_b_sq == (1.0, 1.0)
    assert res.sigma_b_tilde_sq[0] == pytest.approx(0.5, abs=1e-12)
    assert res.sigma_b_tilde_sq[1] == pytest.approx(0.5, abs=1e-12)


def test_bayes_residuals_tilde_sums_to_variance():
    data = _simulated(seed=14, theta=1.7, p_a=0.3, sigma=0.8)
    res = bayes_residuals(data)
    # e + (1 - e) telescopes row by row
    assert res.sigma_b_tilde_sq[0] + res.sigma_b_tilde_sq[1] == pytest.approx(
        0.8**2, rel=1e-14
    )


# ---------------------------------------------------------------------------
# theory identities
# ---------------------------------------------------------------------------


def test_upper_bound_tight_at_oracle_zero_noise():
    data = _simulated(seed=15, sigma=0.0)
    check = check_upper_bound(oracle_model(data), data)
    assert check.lhs == pytest.approx(0.0, abs=1e-12)
    assert check.rhs == pytest.approx(0.0, abs=1e-10)
    assert check.holds


def test_upper_bound_arm_symmetric_shift():
    data = _simulated(seed=16, sigma=0.0, n=1000)
    shifted = FunctionOutcomeModel(
        mu0_fn=lambda x: data.truth.mu0(x) + 2.0,
        mu1_fn=lambda x: data.truth.mu1(x) + 2.0,
    )
    check = check_upper_bound(shifted, data)
    assert check.lhs == pytest.approx(0.0, abs=1e-12)
    assert check.rhs > 0
    assert check.holds


def test_upper_bound_holds_for_fitted_candidate():
    data = _simulated(seed=17, n=20000, theta=1.0)
    model = _random_model(80, data)
    assert check_upper_bound(model, data).holds


def test_reweighting_identity_zero_noise_oracle():
    data = _simulated(seed=18, sigma=0.0)
    check = check_reweighting_identity(oracle_model(data), data)
    assert check.lhs == pytest.approx(0.0, abs=1e-12)
    assert check.rhs == pytest.approx(0.0, abs=1e-12)


def test_reweighting_identity_randomized_reduces_to_scaled_tau_risk():
    data = _simulated(seed=19, theta=0.0, p_a=0.3, sigma=0.5)
    model = _random_model(81, data)
    res = bayes_residuals(data)
    check = check_reweighting_identity(model, data, residuals=res)
    expected_rhs = 0.3 * 0.7 * tau_risk(model, data) + sum(res.sigma_b_tilde_sq)
    assert check.rhs == pytest.approx(expected_rhs, rel=1e-12)


def test_reweighting_identity_monte_carlo():
    data = _simulated(seed=20, n=50000, theta=1.0)
    model = _random_model(82, data)
    assert check_reweighting_identity(model, data).rel_err <= 0.05


# ---------------------------------------------------------------------------
# risk table
# ---------------------------------------------------------------------------


def test_risk_table_columns_and_nonnegative():
    data = _simulated(seed=21, n=300)
    models = [_random_model(s, data) for s in (90, 91, 92)]
    pair = oracle_nuisances(data)
    table = evaluate_candidates(models, data, nuis=pair)
    expected = {
        "tau_risk",
        "mu_risk",
        "mu_risk_ipw",
        "tau_risk_ipw",
        "u_risk",
        "r_risk",
        "mu_risk_ipw_star",
        "tau_risk_ipw_star",
        "u_risk_star",
        "r_risk_star",
    }
    assert set(table.columns) == expected
    for col in table.columns.values():
        assert np.all(np.isfinite(col)) and np.all(col >= 0)


def test_risk_table_selected_lexicographic_tie_break():
    table = RiskTable(
        candidate_ids=("b", "a", "c"),
        columns={"mu_risk": np.array([1.0, 1.0, 2.0])},
    )
    assert table.selected("mu_risk") == "a"


def test_risk_table_csv_schema():
    data = _simulated(seed=22, n=50)
    models = [_random_model(95, data)]
    table = evaluate_candidates(models, data, nuis=oracle_nuisances(data))
    lines = table.to_csv().strip().splitlines()
    assert lines[0] == "candidate_id,risk_name,nuisance_mode,value"
    assert len(lines) == 1 + len(table.columns)
    assert all(len(line.split(",")) == 4 for line in lines[1:])
