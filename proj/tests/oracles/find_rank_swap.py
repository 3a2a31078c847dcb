"""Brute-force search for a 3-experiment / 3-task q-matrix on which adding the
third experiment swaps the final ranks of the first two.

Independent of the C++ engine: ranks, weights and weighted scores are
recomputed here from their definitions. The first hit (lexicographic order)
is frozen into the C++ tests together with the expected leaderboards.

Usage: find_rank_swap.py [fixture.json]
"""
import itertools
import json
import statistics
import sys


def rank(q, descending=True):
    sign = -1 if descending else 1
    return {p: 1 + len([s for s in q.values() if sign * s < sign * v]) for p, v in q.items()}


def leaderboard(qm):
    # qm: {exp: [q_t1, q_t2, q_t3]}
    exps = sorted(qm)
    tasks = range(len(next(iter(qm.values()))))
    deltas = [statistics.pstdev([qm[e][t] for e in exps]) for t in tasks]
    total = sum(deltas)
    weights = [d / total for d in deltas] if total > 0 else [1 / len(deltas)] * len(deltas)
    per_task = [rank({e: qm[e][t] for e in exps}) for t in tasks]
    score = {e: sum(weights[t] * per_task[t][e] for t in tasks) for e in exps}
    final = rank(score, descending=False)
    mean_q = {e: sum(qm[e]) / len(qm[e]) for e in exps}
    return weights, deltas, score, final, mean_q


def main():
    vals = range(0, 6)
    for a in itertools.product(vals, repeat=3):
        for b in itertools.product(vals, repeat=3):
            if sum(a) == sum(b):
                continue
            _, _, _, f2, m2 = leaderboard({"A": list(a), "B": list(b)})
            if not (f2["A"] == 1 and f2["B"] == 2):
                continue
            for c in itertools.product(vals, repeat=3):
                w, d, s, f3, m3 = leaderboard({"A": list(a), "B": list(b), "C": list(c)})
                if f3["B"] == 1 and f3["A"] == 2 and f3["C"] == 3:
                    print("A", a, "B", b, "C", c)
                    print("two-exp:", leaderboard({"A": list(a), "B": list(b)}))
                    print("three-exp:", w, d, s, f3, m3)
                    for x in w + d + list(s.values()):
                        print(repr(x))
                    if len(sys.argv) > 1:
                        write_fixture(sys.argv[1], {"A": list(a), "B": list(b), "C": list(c)})
                    return


def write_fixture(path, qm):
    def board(sub):
        w, d, s, f, m = leaderboard(sub)
        return {"weights": w, "stds": d, "weighted_score": s, "rank": f, "mean_q": m}

    doc = {
        "tasks": ["t0", "t1", "t2"],
        "q": qm,
        "two": board({k: qm[k] for k in ("A", "B")}),
        "three": board(qm),
    }
    with open(path, "w") as out:
        json.dump(doc, out, indent=2)
        out.write("\n")


main()
