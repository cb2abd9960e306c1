# scripts/reproduce_applications.py
"""
Writes the data behind the two worked applications (E_3(0.4) and E_6(0.4)),
the correlation-family curves and, given a toss file, the coin-toss analysis.

    python scripts/reproduce_applications.py --out results/ [--tosses tosses.csv]
"""

import os
import sys
import argparse
import logging
from typing import Dict, Any, Optional

# Add the parent directory to Python path so we can import the packages
current_dir = os.path.dirname(os.path.abspath(__file__))
parent_dir = os.path.dirname(current_dir)
sys.path.insert(0, parent_dir)

import numpy as np

from polytope.geometry import cdf_to_pdf, exact_measure_cdf, triangulate_class
from polytope.inference import CountData, glr_test, mle_fixed_p, read_binary_csv, reshape_tosses
from polytope.measures import MeasureKind, MeasureSpec, correlation_bounds, ray_extrema
from polytope.rays import enumerate_rays, rays_to_dict
from polytope.sampling import empirical_measure_distribution, family_curves, joint_mean_correlation
from utils.formats import write_csv, write_json
from utils.logging_setup import configure_logging

logger = logging.getLogger(__name__)

MU2 = MeasureSpec(MeasureKind.CROSS_MOMENT, 2)
ENTROPY = MeasureSpec(MeasureKind.ENTROPY)


class ApplicationsReport:
    """Computes each application and writes its tables under one directory"""

    def __init__(self, out_dir: str, seed: int = 2024, n_uniform: int = 100_000):
        self.out_dir = out_dir
        self.seed = seed
        self.n_uniform = n_uniform
        os.makedirs(out_dir, exist_ok=True)

    def _path(self, name: str) -> str:
        return os.path.join(self.out_dir, name)

    def _write_json(self, name: str, data: Any):
        with open(self._path(name), 'w') as handle:
            write_json(data, handle)
        logger.info(f"Wrote {self._path(name)}")

    def _write_csv(self, name: str, rows, header):
        with open(self._path(name), 'w', newline='') as handle:
            write_csv(rows, handle, header=header)
        logger.info(f"Wrote {self._path(name)}")

    def mu2_application(self, d: int, p: float) -> Dict[str, Any]:
        """Rays, triangulation and the exact and empirical mu_2 distributions of E_d(p)"""
        tag = f"d{d}_p{p:g}"
        rays = enumerate_rays(d, p)
        self._write_json(f"rays_{tag}.json", rays_to_dict(d, p, rays))

        tri = triangulate_class(d, p)
        self._write_json(f"triangulation_{tag}.json", tri.to_dict())

        exact = exact_measure_cdf(d, p, MU2)
        density = cdf_to_pdf(exact)
        f_at = dict(zip(density.grid.tolist(), density.values.tolist()))
        self._write_csv(f"mu2_exact_{tag}.csv", [(t, F, f_at.get(t, '')) for t, F in exact.rows()],
                        header=['t', 'F', 'f'])

        empirical = empirical_measure_distribution(d, p, MU2, self.n_uniform, self.seed, grid=exact.grid)
        self._write_csv(f"mu2_empirical_{tag}.csv", empirical.rows(), header=['t', 'F'])

        ks = float(np.max(np.abs(exact.values - empirical.values)))
        summary = {
            'd': d,
            'p': p,
            'rays': len(rays),
            'simplices': len(tri.simplices),
            'volume': tri.volume,
            'rho_bounds': list(correlation_bounds(d, p)),
            'ks_on_grid': ks,
        }
        logger.info(f"E_{d}({p}): {len(rays)} rays, {len(tri.simplices)} simplices, K-S distance {ks:.4f}")
        return summary

    def entropy_application(self, d: int, p: float, bins: int = 100) -> Dict[str, Any]:
        """Empirical CDF and density of the entropy over uniform draws from E_d(p)"""
        tag = f"d{d}_p{p:g}"
        grid = np.linspace(0.0, np.log(d + 1), bins + 1)
        empirical = empirical_measure_distribution(d, p, ENTROPY, self.n_uniform, self.seed, grid=grid)
        density = cdf_to_pdf(empirical, delta=float(grid[1] - grid[0]))
        f_at = dict(zip(density.grid.tolist(), density.values.tolist()))
        self._write_csv(f"entropy_empirical_{tag}.csv", [(t, F, f_at.get(t, '')) for t, F in empirical.rows()],
                        header=['t', 'F', 'f'])

        rays = ray_extrema(d, p, ENTROPY)
        above = 1.0 - float(np.interp(rays['max'], empirical.grid, empirical.values))
        mode = int(np.argmax(density.values))
        logger.info(f"Entropy over E_{d}({p}): {above:.3f} of the draws exceed the largest ray entropy")
        return {
            'd': d,
            'p': p,
            'ray_entropy_min': rays['min'],
            'ray_entropy_max': rays['max'],
            'share_above_ray_max': above,
            'density_mode': float(density.grid[mode] + density.delta / 2),
        }

    def joint_application(self, d: int = 3) -> Dict[str, Any]:
        """(p, rho) of uniform draws from all of E_d"""
        joint = joint_mean_correlation(d, self.n_uniform, self.seed)
        self._write_csv(f"joint_p_rho_d{d}.csv", joint.tolist(), header=['p', 'rho'])
        lowest = int(np.argmin(joint[:, 1]))
        return {
            'd': d,
            'draws': int(joint.shape[0]),
            'rho_min_sampled': float(joint[lowest, 1]),
            'p_at_rho_min': float(joint[lowest, 0]),
        }

    def families(self, d: int, p: float, steps: int = 21) -> Dict[str, Any]:
        curves = family_curves(d, p, steps)
        self._write_json(f"families_d{d}_p{p:g}.json", curves)
        return {'d': d, 'p': p, 'steps': steps}

    def coin_tosses(self, path: str, d: int = 5, p: float = 0.5, alpha: float = 0.05) -> Dict[str, Any]:
        """Tosses regrouped d at a time, MLE in E_d(p) and the GLR test"""
        tosses = read_binary_csv(path).reshape(-1)
        counts = CountData.from_matrix(reshape_tosses(tosses, d))
        fitted, weights = mle_fixed_p(counts, p)
        result = glr_test(counts, p, alpha)
        data = {
            'd': d,
            'n': counts.n,
            'sum_counts': counts.sum_counts,
            'pmf_hat': fitted.probs,
            'lambda_hat': weights.weights,
            'glr': result.to_dict(),
        }
        self._write_json('coin_tosses.json', data)
        return data

    def run(self, tosses: Optional[str] = None) -> Dict[str, Any]:
        report = {
            'application_1': self.mu2_application(3, 0.4),
            'application_2': self.mu2_application(6, 0.4),
            'entropy_1': self.entropy_application(3, 0.4),
            'entropy_2': self.entropy_application(6, 0.4),
            'joint': self.joint_application(3),
            'families': self.families(10, 0.4),
        }
        if tosses:
            report['coin_tosses'] = self.coin_tosses(tosses)['glr']
        self._write_json('summary.json', report)
        return report


def main():
    parser = argparse.ArgumentParser(description='Write the data of the worked applications')
    parser.add_argument('--out', default='results', help='output directory')
    parser.add_argument('--seed', type=int, default=2024, help='seed of the uniform draws')
    parser.add_argument('--n', type=int, default=100_000, help='uniform draws per application')
    parser.add_argument('--tosses', default=None, help='CSV of 0/1 tosses (any layout, read row by row)')
    args = parser.parse_args()

    configure_logging()
    ApplicationsReport(args.out, args.seed, args.n).run(args.tosses)


if __name__ == "__main__":
    main()
