"""Builds the extension with cargo and exercises the bindings."""

import os
import shutil
import subprocess
import sys
import tempfile

ROOT = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))


def build():
    subprocess.run(["cargo", "build", "--release", "-p", "poolforge-python"], cwd=ROOT, check=True)
    lib = os.path.join(ROOT, "target", "release", "libpoolforge_py.so")
    out = tempfile.mkdtemp()
    shutil.copy(lib, os.path.join(out, "poolforge_py.so"))
    sys.path.insert(0, out)
    return out


def main():
    out = build()
    import poolforge_py as pf

    species = [0, 1, 2]
    positions = [[0.0, 0.0, 0.0], [1.3, 0.0, 0.0], [0.0, 1.4, 0.2]]
    model = pf.Model(seed=1)
    print(model, "with", model.n_params, "parameters")
    forces = model.forces(species, positions)
    net = [sum(f[a] for f in forces) for a in range(3)]
    assert max(abs(v) for v in net) < 1e-10, net
    phi = model.features("ntk-e", species, positions)
    assert abs(sum(v * v for v in phi) - 1.0) < 1e-12

    path = os.path.join(out, "model.pfpm")
    model.save(path)
    again = pf.Model.load(path)
    assert again.parameters() == model.parameters()

    train = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]]
    pool = [[1.0, 0.0, 0.0], [0.0, 0.0, 1.0], [0.5, 0.5, 0.0], [0.0, 0.3, 0.9]]
    scores = pf.pv_scores(train, pool)
    assert scores[1] > scores[0]
    picks = pf.acquire(train, pool, 2, shortlist=4, chunk=3)
    assert len(picks) == 2 and len({i for i, _ in picks}) == 2
    assert pf.top_k([0.1, 0.9, 0.5], 2) == [(1, 0.9), (2, 0.5)]
    assert pf.tanimoto(8, [0, 1, 2], [1, 2, 3]) == 0.5

    member = [(-1.0, [[0.1, 0.0, 0.0], [-0.1, 0.0, 0.0]])]
    energy, force = pf.committee_scores([member, member])
    assert energy == [0.0] and force == [0.0]

    try:
        pf.acquire(train, pool, 2, rule="nope")
    except ValueError as e:
        print("rejected:", e)
    else:
        raise AssertionError("bad rule accepted")

    rounds = pf.al_run("ntk-ef", seed=0, rounds=1, batch=5)
    print("al_run force RMSE by round:", [round(r["force_rmse"], 3) for r in rounds])
    assert len(rounds) == 2 and len(rounds[1]["selected"]) == 5
    print("smoke test passed")


if __name__ == "__main__":
    main()
