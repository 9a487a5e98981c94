"""Block variance of the fluctuation-dissipation remainder against the box radius."""

import argparse

from disordered_chain import ModelParams, disorder_ensemble, variational_D, w_f_ell_variance


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=64)
    ap.add_argument("--samples", type=int, default=8)
    ap.add_argument("--band", type=int, default=2, help="band radius of the corrector")
    ap.add_argument("--ells", default="4,6,8,10,12")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()
    p = ModelParams(n=args.n)
    ens = disorder_ensemble(p, args.seed, args.samples)
    var = variational_D(args.band, p, ens, correctors=True)
    print(f"# D_var = {var.d_var:.6f}")
    print("ell,variance_no_corrector,variance_with_corrector")
    for ell in (int(v) for v in args.ells.split(",")):
        bare = w_f_ell_variance(ell, p, ens, var.d_var)
        fixed = w_f_ell_variance(ell, p, ens, var.d_var, var.correctors, s=args.band)
        print(f"{ell},{bare:.6f},{fixed:.6f}")


if __name__ == "__main__":
    main()
