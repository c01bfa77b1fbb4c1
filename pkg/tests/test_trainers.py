import numpy as np
import pytest

from leafdx import mlp
from leafdx.trainers import (ALGORITHMS, FunctionObjective, LeastSquaresObjective, TrainerConfig,
                             br_hyperparameter_update, minimize, train, wolfe_search)

LINE_SEARCH_ALGS = ("BFGS", "SCG", "CGB", "CGF", "CGP", "OSS")


def rosen(x):
    return (1 - x[0]) ** 2 + 100 * (x[1] - x[0] ** 2) ** 2


def rosen_grad(x):
    return np.array([-2 * (1 - x[0]) - 400 * x[0] * (x[1] - x[0] ** 2), 200 * (x[1] - x[0] ** 2)])


def small_task(seed=0, n=30, n_in=4, C=3):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, n_in))
    y = np.argmax(X[:, :C], axis=1)
    return mlp.TrainingSet(X, mlp.one_hot(y, C))


def linear_problem(seed, m=60, d=10):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((m, d))
    b = rng.standard_normal(m)
    return A, b, LeastSquaresObjective(lambda th: A @ th - b, lambda th: A, denom=m)


@pytest.mark.parametrize("alg", LINE_SEARCH_ALGS)
def test_rosenbrock(alg):
    res = minimize(FunctionObjective(rosen, rosen_grad), [-1.2, 1.0],
                   TrainerConfig(algorithm=alg, max_epochs=5000, min_gradient=1e-12))
    assert rosen(res.theta) < 1e-6
    np.testing.assert_allclose(res.theta, [1.0, 1.0], atol=1e-3)


@pytest.mark.parametrize("seed", range(3))
def test_lm_reaches_normal_equation_optimum(seed):
    A, b, obj = linear_problem(seed)
    opt = np.linalg.solve(A.T @ A, A.T @ b)
    res = minimize(obj, np.zeros(A.shape[1]), TrainerConfig(algorithm="LM", max_epochs=3, min_gradient=0))
    assert res.epochs_run <= 3
    np.testing.assert_allclose(res.theta, opt, rtol=0, atol=1e-8)


def output_layer_problem(seed, n=60, N=8, C=3, scale=4.0):
    """Network whose hidden layer is a scaled identity; only W2, b2 are trained."""
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, N))
    T = rng.standard_normal((n, C))
    data = mlp.TrainingSet(X, T)
    W1, b1 = scale * np.eye(N), np.zeros(N)
    k = N * N + N

    def params(th):
        return mlp.MlpParams.unflatten(np.concatenate([W1.ravel(), b1, th]), N, N, C)

    obj = LeastSquaresObjective(lambda th: mlp.residuals(params(th), data),
                                lambda th: mlp.jacobian(params(th), data)[:, k:], denom=n * C)
    design = np.hstack([mlp.sigmoid(X @ W1.T), np.ones((n, 1))])
    sol = np.linalg.solve(design.T @ design, design.T @ T)   # (N + 1, C)
    return obj, np.concatenate([sol[:N].T.ravel(), sol[N]]), C * N + C


@pytest.mark.parametrize("seed", range(3))
def test_lm_exact_on_output_layer_fit(seed):
    obj, opt, P = output_layer_problem(seed)
    res = minimize(obj, np.zeros(P), TrainerConfig(algorithm="LM", max_epochs=3, min_gradient=0))
    assert res.epochs_run <= 3
    np.testing.assert_allclose(res.theta, opt, rtol=0, atol=1e-8)


def test_lm_mu_stays_in_bounds():
    res = train(mlp.init_params(4, 6, 3, 0), small_task(), TrainerConfig(algorithm="LM", max_epochs=200))
    mus = res.diagnostics["mu_history"]
    assert min(mus) >= 1e-13 and max(mus) <= 1e10


def test_lm_reports_mu_overflow():
    # a gradient that lies: no damped step can ever reduce the loss
    obj = LeastSquaresObjective(lambda th: np.array([1.0 + th[0] ** 2]), lambda th: np.array([[1.0]]))
    res = minimize(obj, [0.0], TrainerConfig(algorithm="LM", max_epochs=10))
    assert res.stop_reason == "mu_overflow"


@pytest.mark.parametrize("alg", ALGORITHMS)
def test_every_algorithm_reduces_mlp_loss(alg):
    data = small_task()
    rep = train(mlp.init_params(4, 6, 3, 1), data, TrainerConfig(algorithm=alg, max_epochs=150))
    assert rep.stop_reason in ("goal", "min_gradient", "max_epochs", "mu_overflow", "internal")
    assert rep.epochs_run == len(rep.loss_history) <= 150
    assert rep.loss_history[-1] < rep.initial_loss


@pytest.mark.parametrize("alg", ALGORITHMS)
def test_deterministic(alg):
    data = small_task(3)
    cfg = TrainerConfig(algorithm=alg, max_epochs=40)
    a = train(mlp.init_params(4, 5, 3, 2), data, cfg)
    b = train(mlp.init_params(4, 5, 3, 2), data, cfg)
    assert np.array_equal(a.final_params.flatten(), b.final_params.flatten())
    assert a.loss_history == b.loss_history


def test_goal_stop():
    rep = train(mlp.init_params(4, 8, 3, 0), small_task(), TrainerConfig(algorithm="LM", goal=0.05))
    assert rep.stop_reason == "goal" and rep.loss_history[-1] <= 0.05
    assert all(v > 0.05 for v in rep.loss_history[:-1])


def test_goal_met_before_training_runs_zero_epochs():
    rep = train(mlp.init_params(4, 3, 3, 0), small_task(), TrainerConfig(algorithm="BFGS", goal=10.0))
    assert rep.stop_reason == "goal" and rep.epochs_run == 0


def test_max_epochs_one():
    rep = train(mlp.init_params(4, 3, 3, 0), small_task(), TrainerConfig(algorithm="SCG", max_epochs=1))
    assert rep.epochs_run == 1 and rep.stop_reason == "max_epochs"


def test_min_gradient_stop():
    res = minimize(FunctionObjective(lambda x: float(x @ x), lambda x: 2 * x), [1.0, -2.0],
                   TrainerConfig(algorithm="BFGS", min_gradient=1e-6))
    assert res.stop_reason in ("min_gradient", "goal")


def test_unknown_algorithm_lists_names():
    with pytest.raises(ValueError) as exc:
        TrainerConfig(algorithm="ADAM")
    for name in ALGORITHMS:
        assert name in str(exc.value)


def test_config_round_trip():
    cfg = TrainerConfig(algorithm="cgp", max_epochs=7, seed=3)
    assert cfg.algorithm == "CGP"
    assert TrainerConfig.from_dict(cfg.to_dict()) == cfg


def test_non_finite_start_rejected():
    with pytest.raises(Exception, match="not finite"):
        minimize(FunctionObjective(rosen, rosen_grad), [np.nan, 0.0], TrainerConfig(algorithm="BFGS"))


# ---------------------------------------------------------------- Bayesian regularization

def test_gamma_is_p_when_alpha_zero(rng):
    J = rng.normal(size=(30, 7))
    _, _, gamma = br_hyperparameter_update(J.T @ J, 2.0, 1.0, 30, 0.0, 1.0)
    assert gamma == 7.0


def test_gamma_closed_form_on_spectrum(rng):
    J = rng.normal(size=(30, 7))
    lam = np.linalg.eigvalsh(J.T @ J)
    alpha, beta = 0.3, 2.0
    _, _, gamma = br_hyperparameter_update(J.T @ J, 2.0, 1.0, 30, alpha, beta)
    assert gamma == pytest.approx(np.sum(beta * lam / (beta * lam + alpha)), rel=1e-12)


def test_gamma_survives_extreme_beta(rng):
    J = rng.normal(size=(10, 40))  # rank 10 of 40
    _, _, gamma = br_hyperparameter_update(J.T @ J, 1e-30, 5.0, 10, 1e-12, 1e25)
    assert 0.0 <= gamma <= 40.0 and np.isfinite(gamma)


def test_no_update_while_gamma_exceeds_residuals(rng):
    J = rng.normal(size=(5, 12))
    assert br_hyperparameter_update(J.T @ J, 3.0, 2.0, 5, 0.0, 1.0) == (0.0, 1.0, 12.0)


def test_br_gamma_within_bounds_every_update():
    data = small_task(5)
    p0 = mlp.init_params(4, 6, 3, 0)
    rep = train(p0, data, TrainerConfig(algorithm="BR", max_epochs=100))
    P = mlp.n_params(*p0.shape)
    hist = rep.diagnostics["gamma_history"]
    assert hist and all(0.0 <= g <= P for g in hist)
    assert hist[0] == P  # first update starts from alpha = 0
    assert rep.to_dict()["effective_parameters"] == rep.gamma


def test_br_records_objective_per_epoch():
    rep = train(mlp.init_params(4, 6, 3, 0), small_task(5), TrainerConfig(algorithm="BR", max_epochs=60))
    assert len(rep.diagnostics["objective_history"]) == rep.epochs_run


def noise_task(seed, n=40):
    rng = np.random.default_rng(seed)
    X, _ = mlp.standardize(rng.standard_normal((n, 13)))
    return mlp.TrainingSet(X, mlp.one_hot(rng.integers(0, 5, n), 5))


def test_br_shrinks_weights_on_noise():
    wins = 0
    for seed in range(10):
        data, p0 = noise_task(100 + seed), mlp.init_params(13, 10, 5, seed)
        norm = {alg: float(np.sum(train(p0, data, TrainerConfig(algorithm=alg, max_epochs=300))
                                  .final_params.flatten() ** 2)) for alg in ("BR", "LM")}
        wins += norm["BR"] <= norm["LM"]
    assert wins >= 9


def test_br_trades_training_fit_for_shrinkage():
    for seed in range(5):
        data, p0 = noise_task(200 + seed), mlp.init_params(13, 10, 5, seed)
        final = {alg: train(p0, data, TrainerConfig(algorithm=alg, max_epochs=300)).loss_history[-1]
                 for alg in ("BR", "LM")}
        assert final["BR"] >= final["LM"]


# ---------------------------------------------------------------- Rprop / GDX / line search

def test_rprop_rejects_increasing_epochs():
    rep = train(mlp.init_params(4, 6, 3, 0), small_task(), TrainerConfig(algorithm="RPROP", max_epochs=200))
    h = [rep.initial_loss] + rep.loss_history
    assert all(b <= a for a, b in zip(h, h[1:]))


def test_gdx_follows_acceptance_rule():
    cfg = TrainerConfig(algorithm="GDX", max_epochs=300, lr=0.5)
    rep = train(mlp.init_params(4, 6, 3, 0), small_task(), cfg)
    h = [rep.initial_loss] + rep.loss_history
    assert all(b <= cfg.max_perf_inc * a for a, b in zip(h, h[1:]))
    assert not all(rep.diagnostics["accepted"])  # lr 0.5 forces some rejections


def test_wolfe_search_conditions():
    obj = FunctionObjective(rosen, rosen_grad)
    x = np.array([-1.2, 1.0])
    f0, g0 = obj.loss_grad(x)
    d = -g0 / np.linalg.norm(g0)
    ls = wolfe_search(obj, x, d, f0, g0, 1e-3, 1e-4, 0.9)
    assert ls is not None
    assert ls.f <= f0 + 1e-4 * ls.alpha * (g0 @ d)
    assert abs(ls.g @ d) <= 0.9 * abs(g0 @ d)


@pytest.mark.slow
@pytest.mark.parametrize("alg", ALGORITHMS)
def test_full_training_accuracy_on_blobs(alg):
    from leafdx.synthetic import gaussian_blobs
    samples = gaussian_blobs(n=200, seed=0)
    X, _ = mlp.standardize(np.array([s.features for s in samples]))
    y = np.array([s.label.index for s in samples])
    rep = train(mlp.init_params(13, 20, 5, 0), mlp.TrainingSet(X, mlp.one_hot(y, 5)),
                TrainerConfig(algorithm=alg, max_epochs=1000))
    assert np.mean(mlp.predict(rep.final_params, X) == y) == 1.0
