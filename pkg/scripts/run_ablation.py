"""Policy x compression ablation on synthetic traces; prints the mean instruction-cosine matrix."""

import argparse

from samem.cli import ablation_matrix, format_matrix
from samem.harness import generate_synthetic


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seeds", type=int, default=16)
    ap.add_argument("--n-frames", type=int, default=24)
    ap.add_argument("--tokens", type=int, default=64)
    ap.add_argument("--dim", type=int, default=16)
    ap.add_argument("--drift", type=float, default=0.3)
    ap.add_argument("--relevant-fraction", type=float, default=0.25)
    ap.add_argument("--m-max", type=int, default=5)
    ap.add_argument("--k", type=int, default=30)
    args = ap.parse_args()
    traces = [generate_synthetic(s, args.n_frames, args.tokens, args.dim, args.drift, args.relevant_fraction)
              for s in range(args.seeds)]
    ns = argparse.Namespace(m_max=args.m_max, k=args.k, op="fuse", criterion="relevance", compression="inst-cur",
                            w_txt=0.3, w_adj=0.4, w_cur=0.3)
    print(format_matrix(ablation_matrix(traces, ns)))


if __name__ == "__main__":
    main()
