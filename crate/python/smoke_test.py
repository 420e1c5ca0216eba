"""End-to-end exercise of the Python bindings."""

import evosyn_py as es


def check(cond, label):
    if not cond:
        raise SystemExit(f"FAIL {label}")
    print(f"ok   {label}")


def main():
    adder = es.ripple_adder(4)
    check(adder.num_inputs == 8 and adder.num_outputs == 5, "adder shape")

    # 11 + 6 = 17, little-endian input and output bit order
    a, b = 11, 6
    bits = [bool(a >> k & 1) for k in range(4)] + [bool(b >> k & 1) for k in range(4)]
    outs, next_state = adder.simulate(bits)
    total = sum(1 << k for k, v in enumerate(outs) if v)
    check(total == 17 and next_state == [], "adder arithmetic")

    text = adder.to_aiger()
    back = es.Aig.parse(text)
    check(back.to_aiger() == text, "aiger round trip")

    opt, deltas = es.optimize(adder, "balance\nrewrite\n")
    check(len(deltas) == 2 and deltas[0]["pass_name"] == "balance", "pass deltas")
    check(
        opt.metrics()["and_count"] <= adder.metrics()["and_count"],
        "rewrite never grows the graph",
    )

    verdict = es.check_equiv(adder, opt)
    check(verdict["status"] == "equivalent", "optimized graph stays equivalent")

    par = es.parity(8)
    verdict = es.check_equiv(adder, es.ripple_adder(4))
    check(verdict["status"] == "equivalent", "self equivalence")
    try:
        es.check_equiv(adder, par)
        raise SystemExit("FAIL interface mismatch should raise")
    except ValueError:
        print("ok   interface mismatch raises")

    broken = es.optimize(par, "rewrite fault_xor=true\n")[0]
    verdict = es.check_equiv(par, broken)
    check(verdict["status"] == "not_equivalent", "fault injection is caught")
    cex = verdict["counterexample"]
    check(
        par.simulate(cex)[0] != broken.simulate(cex)[0],
        "counterexample replays on both graphs",
    )

    mapped = es.map_luts(opt, "mapper.lut_k=4\n")
    check(mapped["verified"] and mapped["lut_count"] > 0, "lut cover verified")

    rnd = es.random_aig(7, 6, 40)
    mapped = es.map_luts(rnd)
    check(mapped["verified"], "random graph maps cleanly")

    names = [name for name, _ in es.default_corpus()]
    check(len(names) == 20 and "add4" in names, "stock corpus")

    run = es.mock_evolution(3, seed=0, workers=2, corpus_size=6)
    check(len(run["journal"]) == 3, "mock evolution journal")
    check(run["champion_qor"] <= 1.0 and not run["halted"], "champion tracked")
    statuses = {r["status"] for r in run["journal"]}
    check(
        statuses
        <= {
            "integrated",
            "partial_preserved",
            "rolled_back",
            "build_failed",
            "verify_failed",
            "eval_failed",
        },
        "journal statuses",
    )

    print("smoke test passed")


if __name__ == "__main__":
    main()
