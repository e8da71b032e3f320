"""Quick check that the extension module imports and agrees with the model."""

import math

import entropy_roofline as er


def main():
    arch = er.ArchParams()
    assert arch.effective_beta(0.0) == arch.beta_data
    assert arch.effective_beta(1.0) == arch.beta_rand
    assert arch.classify_regime(1000.0, 0.0) == "ComputeBound"
    assert arch.classify_regime(1.0, 1.0) == "EntropyBound"
    assert len(arch.roofline_curve(0.1, 0.1, 1000.0, 25)) == 25

    slow = er.ArchParams(beta_data=1e4, beta_rand=1.0)
    assert abs(slow.bandwidth_compression(0.01) - 100.99) < 1e-9

    w = er.bnn_layer(128, 128, 1)
    assert w.alpha > 0.98
    r = er.simulate(w, backend="von-neumann", mode="serialized", seed=7)
    assert r["stoch_accesses"] == w.stoch_accesses
    o = er.simulate(w, mode="overlapped", seed=7)
    assert o["elapsed_time"] <= r["elapsed_time"]

    csv = er.sweep('{"alpha": [0.0, 0.5], "ai": [1.0, 10.0]}', None, 2)
    lines = [l for l in csv.splitlines() if l and not l.startswith("#")]
    assert len(lines) == 1 + 4, lines

    z0, z1 = er.box_muller(0.25, 0.5)
    assert math.isfinite(z0) and math.isfinite(z1)
    assert er.reparameterize(1.0, 2.0, 0.5) == 2.0

    xs = er.pipeline_samples(20000, seed=3)
    rep = er.fidelity_report(xs)
    assert abs(rep["mean"]) < 0.05 and rep["ks_pass"], rep

    mem = er.PMemArray(2, 2, "decoupled-near-memory")
    mem.write_gaussian(0, 0, 1.0, 0.5)
    s = er.EntropyStream(seed=1)
    draws = [mem.sample(0, 0, s) for _ in range(2000)]
    assert abs(sum(draws) / len(draws) - 1.0) < 0.1

    try:
        arch.effective_beta(1.5)
    except ValueError:
        pass
    else:
        raise AssertionError("alpha outside [0, 1] accepted")

    print("smoke test ok")


if __name__ == "__main__":
    main()
