import os

import numpy as np
import pytest


def test_case_roundtrip(cc, data_dir):
    net = cc.load_case(os.path.join(data_dir, "case14.m"))
    assert net.n_bus == 14
    assert net.n_gen == 5
    assert net.n_branch == 20
    again = cc.parse_case(open(os.path.join(data_dir, "case14.m")).read())
    assert again.to_json() == net.to_json()


def test_partition_dimensions(cc, data_dir):
    net = cc.load_case(os.path.join(data_dir, "case14.m"))
    idx = cc.partition_variables(net)
    assert idx.dim_x == 9
    assert idx.dim_u == 27
    assert idx.dim_phi == 28
    assert idx.n_gen + idx.n_load == idx.n_bus


def test_power_flow_and_constraints(cc, data_dir):
    net = cc.load_case(os.path.join(data_dir, "case14.m"))
    phi = cc.nominal_loads(net)
    pol = cc.init_policy(net, cc.PolicyMode.Full, seed=1)
    d = cc.forward(pol, phi)
    u = cc.solve_pf(net, d, phi)
    assert u.theta[0] == 0.0
    assert np.all(u.v > 0.8)
    y = cc.constraint_values(net, u, phi)
    assert len(y.values) == cc.partition_variables(net).n_constraints


def test_policy_box_guarantee(cc, data_dir):
    net = cc.load_case(os.path.join(data_dir, "case14.m"))
    idx = cc.partition_variables(net)
    for seed in range(5):
        pol = cc.init_policy(net, cc.PolicyMode.Full, seed=seed)
        for k, phi in enumerate(cc.sample_loads(net, 0.3, 20, seed + 100)):
            x = cc.forward(pol, phi).pack()
            assert x.shape == (idx.dim_x,)
            assert np.all(x > idx.limits().min() - 10)  # sanity
            # the tanh output stage keeps the dispatch strictly in its box
            lo, hi = 0.94, 1.06
            assert np.all(x[: idx.n_gen] > lo - 1e-12)
            assert np.all(x[: idx.n_gen] < hi + 1e-12)


def test_logistic_surrogate(cc):
    assert cc.logistic(0.0, 0.01) == 0.5
    assert cc.logistic(-0.1, 0.01) > 1 - 5e-5
    assert cc.logistic(0.1, 0.01) < 5e-5
    assert cc.logistic_grad(0.0, 0.01) == pytest.approx(-25.0)


def test_short_training_runs_and_is_deterministic(cc, data_dir):
    net = cc.load_case(os.path.join(data_dir, "case2.m"))
    cfg = cc.TrainConfig()
    cfg.epochs = 1
    cfg.k_train = 20
    cfg.k_test = 5
    cfg.seed = 11
    a = cc.train(net, cfg)
    b = cc.train(net, cfg)
    assert np.array_equal(a.params.flatten(), b.params.flatten())

    _, test = cc.make_split(net, cfg.radius, cfg.k_train, cfg.k_test, cfg.seed)
    m = cc.evaluate(a.params, net, test)
    assert m.n_samples == 5
    assert 0.0 <= m.max_violation_pct <= 100.0


def test_baseline_opf(cc, data_dir):
    net = cc.load_case(os.path.join(data_dir, "case6ww.m"))
    sol = cc.solve_opf(net, cc.nominal_loads(net))
    assert sol.converged
    assert sol.cost == pytest.approx(3143.97, rel=5e-3)
