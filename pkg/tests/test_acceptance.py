"""Acceptance checklist. Each test prints one [PASS]/[FAIL] verdict line.

The verdict lines bypass capture so the checklist is visible in any
pytest run; the asserts after each line carry the same conditions.
"""

import json
import sys
import time

import numpy as np

from bridgeda import losses as L
from bridgeda import tensor as T
from bridgeda.cli import cli_dispatch
from bridgeda.divergence import a_distance_from_error, sliced_wasserstein, validate_bridge
from bridgeda.nn import Mlp, MlpSpec
from bridgeda.pipelines import (
    CfganConfig,
    PadaConfig,
    build_cfgan,
    evaluate,
    train_cfgan,
    train_pada,
    train_source_only,
)
from bridgeda.prototypes import compute_prototypes, proto_classify
from bridgeda.synthdata import (
    PointFamily,
    TranslationTaskSpec,
    TripleSpec,
    gen_domain_triple,
    gen_translation_task,
    read_dataset,
    write_dataset,
)
from bridgeda.tensor import Tensor, grad_check


def _verdict(name: str, ok: bool, detail: str) -> None:
    line = f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}"
    print(line, file=sys.__stdout__, flush=True)


# ---------------------------------------------------------------------------
# 1. gradients of every loss agree with central differences


def _gradient_cases():
    ker = L.KernelSpec((0.7, 1.5))

    def ce(rng, k):
        labels = rng.integers(0, 3, size=4)
        return (lambda x: L.cross_entropy(x, labels)), rng.normal(size=(4, 3))

    def di(rng, k):
        y = rng.integers(0, 2, size=6).astype(np.float64)
        return (lambda x: L.domain_identifier_loss(T.sigmoid(x), y)), rng.normal(size=6)

    def ent(rng, k):
        return (lambda x: L.entropy_confusion_loss(T.softmax(x, axis=1))), rng.normal(size=(4, 3))

    def mmd(rng, k):
        y = Tensor(rng.normal(size=(5, 2)))
        return (lambda x: L.mmd_squared(x, y, ker)), rng.normal(size=(4, 2))

    def cld(rng, k):
        ids = [np.array([0, 1, 2]), np.array([3, 4, 5])]
        sets_b = [Tensor(rng.normal(size=(3, 2))) for _ in range(2)]
        sets_c = [Tensor(rng.normal(size=(3, 2))) for _ in range(2)]

        def f(x):
            sets_a = [T.take_rows(x, i) for i in ids]
            return L.class_level_discrepancy(sets_a, sets_b, sets_c, ker)

        return f, rng.normal(size=(6, 2))

    def mine(rng, k):
        net = Mlp.init(MlpSpec((2, 8, 1), activation="tanh"), k)
        q = rng.normal(size=(5, 1))
        qs = Tensor(q[rng.permutation(5)])
        q = Tensor(q)
        return (lambda x: L.mine_estimate(x, q, qs, net)), rng.normal(size=(5, 1))

    def rec(rng, k):
        net = Mlp.init(MlpSpec((4, 8, 2), activation="tanh"), k)
        ci = Tensor(rng.normal(size=(5, 2)))
        orig = Tensor(rng.normal(size=(5, 2)))
        return (lambda x: L.reconstruction_loss(x, ci, orig, net)), rng.normal(size=(5, 2))

    def gan_d(rng, k):
        r = T.sigmoid(Tensor(rng.normal(size=4)))
        return (lambda x: L.gan_pair_losses(r, T.sigmoid(x))[0]), rng.normal(size=4)

    def gan_g(rng, k):
        r = T.sigmoid(Tensor(rng.normal(size=4)))
        return (lambda x: L.gan_pair_losses(r, T.sigmoid(x))[1]), rng.normal(size=4)

    def cycle(rng, k):
        base = rng.normal(size=(4, 3))
        # keep every coordinate well off the L1 kink at zero difference
        recon = Tensor(base + rng.choice([-1.0, 1.0], size=(4, 3)) * rng.uniform(0.2, 1.0, size=(4, 3)))
        return (lambda x: L.cycle_consistency(x, recon)), base

    def chain(head, wrt):
        # d_loss sees generator outputs as constants, so only the real-data
        # path (the bridge batch) carries its analytic gradient; the two
        # generator heads differentiate through the source batch.
        def build(rng, k):
            gen_spec = MlpSpec((2, 4, 2), activation="tanh")
            disc_spec = MlpSpec((2, 4, 1), activation="tanh", final_activation="sigmoid")
            gens = L.CfganGenerators(*[Mlp.init(gen_spec, 10 * k + j) for j in range(4)])
            discs = L.CfganDiscriminators(*[Mlp.init(disc_spec, 10 * k + 5 + j) for j in range(3)])
            xs = rng.normal(size=(3, 2))
            yb = rng.normal(size=(3, 2))
            zt = rng.normal(size=(3, 2))

            def f(x):
                args = (x, yb, zt) if wrt == "source" else (xs, x, zt)
                out = L.cfgan_objective(*args, gens, discs, 0.7)
                return getattr(out, head)

            return f, rng.normal(size=(3, 2))

        return build

    return [
        ("cross_entropy", ce),
        ("domain_identifier_loss", di),
        ("entropy_confusion_loss", ent),
        ("mmd_squared", mmd),
        ("class_level_discrepancy", cld),
        ("mine_estimate", mine),
        ("reconstruction_loss", rec),
        ("gan_pair_losses.d", gan_d),
        ("gan_pair_losses.g", gan_g),
        ("cycle_consistency", cycle),
        ("cfgan_objective.d_loss", chain("d_loss", "bridge")),
        ("cfgan_objective.g_adv", chain("g_adv", "source")),
        ("cfgan_objective.cycle", chain("cycle", "source")),
    ]


def test_gradient_suite():
    t0 = time.perf_counter()
    worst = {}
    for idx, (name, builder) in enumerate(_gradient_cases()):
        errs = []
        for k in range(20):
            rng = np.random.default_rng(9000 + 100 * idx + k)
            f, point = builder(rng, k)
            errs.append(grad_check(f, point))
        worst[name] = max(errs)
    elapsed = time.perf_counter() - t0
    top = max(worst.values())
    ok = top < 1e-4 and elapsed < 60.0
    _verdict(
        "gradient suite",
        ok,
        f"{len(worst)} losses x 20 points, worst rel err {top:.2e} (tol 1e-4), {elapsed:.1f}s",
    )
    for name, err in worst.items():
        assert err < 1e-4, f"{name}: rel err {err:.3e}"
    assert elapsed < 60.0


# ---------------------------------------------------------------------------
# 2. kernel discrepancy against a direct all-pairs oracle


def _oracle_mmd2(x, y, kernel):
    total = 0.0
    for bw in kernel.bandwidths:
        for u, v, sign in ((x, x, 1.0), (y, y, 1.0), (x, y, -2.0)):
            d2 = ((u[:, None, :] - v[None, :, :]) ** 2).sum(axis=-1)
            total += sign * float(np.mean(np.exp(-d2 / (2.0 * bw * bw))))
    return total


def test_mmd_matches_all_pairs_oracle():
    rng = np.random.default_rng(20)
    worst = 0.0
    for _ in range(10):
        n, m = (int(v) for v in rng.integers(2, 9, size=2))
        d = int(rng.integers(1, 5))
        x, y = rng.normal(size=(n, d)), rng.normal(size=(m, d))
        ker = L.KernelSpec(tuple(rng.uniform(0.3, 3.0, size=3)))
        impl = L.mmd_squared(Tensor(x), Tensor(y), ker).item()
        worst = max(worst, abs(impl - _oracle_mmd2(x, y, ker)))

    x = rng.normal(size=(6, 2))
    shuffled = x[rng.permutation(6)]
    multiset = abs(L.mmd_squared(Tensor(x), Tensor(shuffled), L.median_heuristic(x, shuffled)).item())

    a, b = rng.normal(size=(5, 3)), rng.normal(size=(4, 3))
    k2 = L.KernelSpec((0.8, 1.7))
    symmetric = L.mmd_squared(Tensor(a), Tensor(b), k2).item() == L.mmd_squared(Tensor(b), Tensor(a), k2).item()

    ok = worst < 1e-10 and multiset < 1e-12 and symmetric
    _verdict(
        "mmd oracle",
        ok,
        f"all-pairs diff {worst:.2e} (tol 1e-10), multiset {multiset:.2e} (tol 1e-12), "
        f"symmetry {'exact' if symmetric else 'BROKEN'}",
    )
    assert worst < 1e-10
    assert multiset < 1e-12
    assert symmetric


# ---------------------------------------------------------------------------
# 3. mutual information estimates on correlated Gaussians


def test_mi_estimator_analytic_oracle():
    report = []
    ok = True
    for rho in (0.0, 0.5, 0.9):
        true_mi = -0.5 * np.log(1.0 - rho ** 2)
        rng = np.random.default_rng(42)
        x = rng.normal(size=10_000)
        y = rho * x + np.sqrt(1.0 - rho ** 2) * rng.normal(size=10_000)
        t0 = time.perf_counter()
        est = L.fit_mine(x, y, steps=2000, seed=0)
        elapsed = time.perf_counter() - t0
        err = abs(est - true_mi)
        ok = ok and err <= 0.1 and elapsed < 120.0
        report.append((rho, true_mi, est, err, elapsed))
    detail = ", ".join(
        f"rho={rho}: est {est:.4f} vs {true:.4f} (err {err:.4f}, {sec:.0f}s)"
        for rho, true, est, err, sec in report
    )
    _verdict("mi estimator", ok, detail + "; tol 0.1, 120s per setting")
    for rho, true, est, err, sec in report:
        assert err <= 0.1, f"rho={rho}: |{est:.4f} - {true:.4f}| = {err:.4f}"
        assert sec < 120.0, f"rho={rho}: took {sec:.0f}s"


# ---------------------------------------------------------------------------
# 4. distance identities and bridge betweenness on the rotation triple


def test_distance_identities_and_bridge_ordering():
    id_ok = a_distance_from_error(0.5) == 0.0 and a_distance_from_error(0.0) == 2.0

    hits = 0
    per_seed = []
    for seed in range(5):
        tri = gen_domain_triple(
            TripleSpec(n_classes=4, n_features=2, n_per_domain=500,
                       rotation=100.0, gap=1.0, seed=seed)
        )
        feats = (tri.source.features, tri.bridge.features, tri.target.features)
        ok_a, _ = validate_bridge(*feats, metric="adist")
        ok_m, _ = validate_bridge(*feats, metric="mmd")
        per_seed.append(ok_a and ok_m)
        hits += int(ok_a and ok_m)

    ok = id_ok and hits >= 4
    _verdict(
        "domain distance",
        ok,
        f"identities {'exact' if id_ok else 'BROKEN'}, "
        f"bridge strictly between endpoints under both metrics in {hits}/5 seeds (need 4)",
    )
    assert id_ok
    assert hits >= 4, f"per-seed verdicts: {per_seed}"


# ---------------------------------------------------------------------------
# 5. prototypes equal brute-force class means; two-anchor softmax


def test_prototype_suite():
    rng = np.random.default_rng(50)
    emb = rng.normal(size=(40, 3))
    lab = rng.integers(0, 5, size=40)
    protos = compute_prototypes(emb, lab, 5)
    means_ok = True
    for c in range(5):
        rows = np.array([emb[i] for i in range(40) if lab[i] == c])
        if rows.size:
            means_ok = means_ok and np.array_equal(protos.prototypes[c], rows.mean(axis=0))
            means_ok = means_ok and protos.counts[c] == rows.shape[0]
        else:
            means_ok = means_ok and protos.counts[c] == 0

    two = compute_prototypes(np.array([[0.0], [1.0]]), np.array([0, 1]), 2)
    q = 0.3
    probs, class_ids = proto_classify(np.array([q]), two)
    raw = np.exp(np.array([-(q - 0.0) ** 2, -(q - 1.0) ** 2]))
    hand = raw / raw.sum()
    fixture_err = float(np.max(np.abs(probs.data - hand)))

    ok = means_ok and fixture_err <= 1e-12 and list(class_ids) == [0, 1]
    _verdict(
        "prototypes",
        ok,
        f"class means {'exact' if means_ok else 'BROKEN'}, "
        f"two-anchor softmax err {fixture_err:.2e} (tol 1e-12)",
    )
    assert means_ok
    assert fixture_err <= 1e-12
    assert list(class_ids) == [0, 1]


# ---------------------------------------------------------------------------
# 6. zero-weight reduction plus the bridged-adaptation accuracy delta


def test_adaptation_reduction_and_bridge_delta():
    t0 = time.perf_counter()

    tri = gen_domain_triple(TripleSpec(3, 2, 90, rotation=60.0, gap=1.0, seed=3))
    cfg = PadaConfig(iterations=150, seed=3, alpha_adv=0.0, beta_proto=0.0,
                     gamma_ent=0.0, delta_rec=0.0, eta_mi=0.0)
    _, rec_so = train_source_only(tri.source, cfg)
    _, rec_pa = train_pada(tri.source, tri.bridge, tri.target, cfg)
    reduction_ok = [r.to_json() for r in rec_so] == [r.to_json() for r in rec_pa]

    deltas = []
    for seed in range(5):
        tri = gen_domain_triple(
            TripleSpec(n_classes=4, n_features=2, n_per_domain=600,
                       rotation=100.0, gap=1.0, seed=seed)
        )
        run_cfg = PadaConfig(iterations=3000, seed=seed, eval_every=0)
        so_model, _ = train_source_only(tri.source, run_cfg)
        pa_model, _ = train_pada(tri.source, tri.bridge, tri.target, run_cfg)
        sealed = tri.sealed["target"]
        acc_so = evaluate(so_model, sealed)["target"]
        acc_pa = evaluate(pa_model, sealed)["target"]
        deltas.append(100.0 * (acc_pa - acc_so))
    mean_delta = float(np.mean(deltas))
    elapsed = time.perf_counter() - t0

    ok = reduction_ok and mean_delta >= 10.0 and elapsed < 600.0
    _verdict(
        "bridged adaptation",
        ok,
        f"zero-weight metric streams {'identical' if reduction_ok else 'DIVERGED'}; "
        f"target accuracy delta {mean_delta:+.1f} points over 5 seeds (need +10), {elapsed:.0f}s",
    )
    assert reduction_ok
    assert mean_delta >= 10.0, f"per-seed deltas: {[f'{d:+.1f}' for d in deltas]}"
    assert elapsed < 600.0


# ---------------------------------------------------------------------------
# 7. two-hop translation on nested rings


def _zero_or_absent(net):
    return all(p.grad is None or not np.any(p.grad) for p in net.params)


def test_two_hop_translation_toy():
    t0 = time.perf_counter()
    data = gen_translation_task(
        TranslationTaskSpec(
            PointFamily("ring", radius=1.0),
            PointFamily("ring", radius=2.0),
            PointFamily("ring", radius=3.0),
        )
    )
    model, _ = train_cfgan(data, CfganConfig(seed=0))

    xs = data["source"].features
    xt = data["target"].features
    fake_b = model.generators.s2b(Tensor(xs))
    fake_t = model.generators.b2t(fake_b)
    flow = L.cycle_consistency(fake_b, model.generators.t2b(fake_t)).item()
    ratio = sliced_wasserstein(fake_t.data, xt, seed=0) / sliced_wasserstein(xs, xt, seed=0)

    # with the second hop switched off, its parameters must see exact zeros
    idle = build_cfgan(2, CfganConfig(seed=0))
    xb = data["bridge"].features
    out = L.cfgan_objective(xs[:16], xb[:16], xt[:16],
                            idle.generators, idle.discriminators, 0.0)
    T.backward(out.g_adv + T.multiply(out.cycle, Tensor(30.0)))
    gen_pass = (
        _zero_or_absent(idle.generators.b2t)
        and _zero_or_absent(idle.discriminators.d_t)
        and not _zero_or_absent(idle.generators.s2b)
    )
    idle = build_cfgan(2, CfganConfig(seed=0))
    out = L.cfgan_objective(xs[:16], xb[:16], xt[:16],
                            idle.generators, idle.discriminators, 0.0)
    T.backward(out.d_loss)
    disc_pass = (
        _zero_or_absent(idle.discriminators.d_t)
        and _zero_or_absent(idle.generators.b2t)
        and not _zero_or_absent(idle.discriminators.d_b)
    )
    elapsed = time.perf_counter() - t0

    ok = flow < 0.05 and ratio < 0.25 and gen_pass and disc_pass and elapsed < 300.0
    _verdict(
        "translation chain",
        ok,
        f"flow cycle {flow:.4f} (tol 0.05), distance ratio {ratio:.3f} (tol 0.25), "
        f"idle second hop grads {'zero' if gen_pass and disc_pass else 'NONZERO'}, {elapsed:.0f}s",
    )
    assert flow < 0.05
    assert ratio < 0.25
    assert gen_pass
    assert disc_pass
    assert elapsed < 300.0


# ---------------------------------------------------------------------------
# 8. byte-level determinism of emitted artifacts; dataset round trip


def test_determinism_and_round_trip(tmp_path):
    config = tmp_path / "run.json"
    config.write_text(json.dumps({
        "data": {"triple": {"n_classes": 3, "n_features": 2, "n_per_domain": 60, "seed": 0}},
        "train": {"seed": 0, "iterations": 30},
    }), encoding="utf-8")
    payloads = []
    for name in ("one", "two"):
        out = tmp_path / name
        code = cli_dispatch(["train", "pada", "--config", str(config), "--out", str(out)])
        assert code == 0
        payloads.append(((out / "metrics.jsonl").read_bytes(), (out / "curves.svg").read_bytes()))
    metrics_same = payloads[0][0] == payloads[1][0]
    svg_same = payloads[0][1] == payloads[1][1]

    tri = gen_domain_triple(TripleSpec(3, 2, 45, seed=2))
    path = tmp_path / "roundtrip.csv"
    write_dataset(path, tri.source)
    back = read_dataset(path)
    trip_ok = (
        np.array_equal(back.features, tri.source.features)
        and np.array_equal(back.labels, tri.source.labels)
        and back.domain_tag == tri.source.domain_tag
    )

    ok = metrics_same and svg_same and trip_ok
    _verdict(
        "determinism",
        ok,
        f"metrics log {'byte-identical' if metrics_same else 'DIFFERS'}, "
        f"svg {'byte-identical' if svg_same else 'DIFFERS'}, "
        f"dataset round trip {'exact' if trip_ok else 'LOSSY'}",
    )
    assert metrics_same
    assert svg_same
    assert trip_ok
