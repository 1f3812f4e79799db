"""Subcommand dispatch: resolve the run configuration, compute, write outputs."""

import os
import sys
import traceback
from typing import Dict, List

from . import __version__
from .charge_basis import flux_sweep
from .config import Config, RunConfig, build_run_config
from .decoherence import decoherence_budget, purcell_curve
from .errors import InputError, TrimodeError
from .export import write_csv, write_yaml
from .fitting import ObservationSet, bootstrap_uncertainty, fit_parameters
from .normal_modes import effective_model, effective_spectrum
from .resonator import chi_flux_profile, dispersive_report
from .validation import run_validation

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NUMERICAL = 2

SPECTRUM_COLUMNS = ['variant', 'flux', 'branch', 'frequency_GHz', 'hybridized']
CHI_KINDS = ('total', 'direct', 'indirect')


def occupation_code(occupation) -> str:
    return ''.join(str(n) for n in occupation)


class CommandRunner:
    """Runs one trimode subcommand and maps failures to exit codes."""

    def __init__(self, config: Config):
        self.config = config
        self.progress = sys.stderr.isatty()

    def run(self, args) -> int:
        """Execute the subcommand named by `args.command`.

        Returns 0 on success, 1 for input errors and 2 for numerical failures
        or failed validation checks.
        """
        handler = getattr(self, f'cmd_{args.command}', None)
        if handler is None:
            print(f"ERROR: unknown command {args.command!r}", file=sys.stderr)
            return EXIT_INPUT
        try:
            run = build_run_config(
                self.config, out=args.out, seed=args.seed, grid=args.grid,
                n_max=args.nmax, bootstrap=args.bootstrap,
            )
            return handler(run, args)
        except (InputError, FileNotFoundError) as e:
            self._report(e)
            return EXIT_INPUT
        except TrimodeError as e:
            self._report(e)
            return EXIT_NUMERICAL

    def _report(self, error: Exception):
        print(f"ERROR: {error}", file=sys.stderr)
        if self.config.get('debug', False):
            traceback.print_exc()

    def _metadata(self, run: RunConfig, command: str) -> Dict[str, object]:
        return {
            'trimode_version': __version__,
            'config_hash': run.config_hash,
            'command': command,
            'seed': run.seed,
        }

    def _path(self, run: RunConfig, name: str) -> str:
        return os.path.join(run.output_dir, name)

    def cmd_spectrum(self, run: RunConfig, args) -> int:
        """Exact, effective-coupled and effective-bare branches over the flux grid."""
        grid = run.grid.points()
        sweep = flux_sweep(run.circuit, grid, run.basis, workers=run.workers, progress=self.progress)
        rows: List[Dict[str, object]] = []
        for phi, sol in zip(sweep.flux, sweep.solutions):
            for energy, label in zip(sol.energies[1:], sol.labels[1:]):
                rows.append({'variant': 'exact', 'flux': phi, 'branch': occupation_code(label.occupation),
                             'frequency_GHz': energy, 'hybridized': label.hybridized})
        for phi in grid:
            ep = effective_model(run.circuit, float(phi))
            for variant, model in (('effective_coupled', ep), ('effective_bare', ep.with_couplings_zeroed())):
                for level in effective_spectrum(model, run.cutoff, n_levels=run.basis.n_levels)[1:]:
                    rows.append({'variant': variant, 'flux': phi, 'branch': occupation_code(level.occupation),
                                 'frequency_GHz': level.energy, 'hybridized': level.hybridized})
        path = write_csv(self._path(run, 'spectrum.csv'), rows, SPECTRUM_COLUMNS,
                         self._metadata(run, 'spectrum'))
        print(f"spectrum: {len(rows)} rows -> {path}")
        return EXIT_OK

    def cmd_chi(self, run: RunConfig, args) -> int:
        """Direct, indirect and total dispersive shifts of modes A and B versus flux."""
        res = self._resonator(run)
        profile = chi_flux_profile(run.circuit, res, run.grid.points(), run.basis,
                                   workers=run.workers, progress=self.progress)
        columns = ['flux']
        for m in ('A', 'B'):
            columns += [f'chi_{m}_{kind}' for kind in CHI_KINDS]
        columns += ['g_A', 'g_B', 'chi_A_general', 'chi_B_general']
        rows = []
        for phi, report in zip(profile.flux, profile.reports):
            row: Dict[str, object] = {'flux': phi}
            for m in ('A', 'B'):
                row[f'chi_{m}_total'] = report.chi_total.get(m, float('nan'))
                row[f'chi_{m}_direct'] = report.chi_direct.get(m, float('nan'))
                row[f'chi_{m}_indirect'] = report.chi_indirect.get(m, float('nan'))
                row[f'g_{m}'] = report.g.get(m, float('nan'))
                row[f'chi_{m}_general'] = report.chi_general.get(m, float('nan'))
            rows.append(row)
        path = write_csv(self._path(run, 'chi.csv'), rows, columns, self._metadata(run, 'chi'))
        print(f"chi: {len(rows)} flux points -> {path}")
        return EXIT_OK

    def cmd_decoherence(self, run: RunConfig, args) -> int:
        """Flux and photon dephasing, Purcell and T2 limits of modes A and B."""
        res = self._resonator(run)
        sweep = flux_sweep(run.circuit, run.grid.points(), run.basis, workers=run.workers, progress=self.progress)
        reports = [dispersive_report(sol, res, effective_model(run.circuit, float(phi)))
                   for phi, sol in zip(sweep.flux, sweep.solutions)]
        rows = decoherence_budget(run.circuit, sweep, reports, res, run.noise, run.photon_numbers, run.basis)
        metadata = self._metadata(run, 'decoherence')
        path = write_csv(self._path(run, 'decoherence.csv'), rows, metadata=metadata)
        print(f"decoherence: {len(rows)} rows -> {path}")
        if run.purcell_detunings:
            curve = purcell_curve(sweep.flux, reports, res, run.purcell_detunings)
            path = write_csv(self._path(run, 'purcell.csv'), curve, metadata=metadata)
            print(f"purcell: {len(curve)} rows -> {path}")
        return EXIT_OK

    def cmd_fit(self, run: RunConfig, args) -> int:
        """Fit the circuit to an observation CSV; optional residual bootstrap."""
        observations = ObservationSet.from_csv(args.observations)
        fit = fit_parameters(observations, run.circuit, res=run.resonator, settings=run.fit)
        if run.bootstrap > 0:
            bootstrap_uncertainty(fit, observations, n_samples=run.bootstrap, seed=run.seed,
                                  workers=run.workers, progress=self.progress)

        metadata = self._metadata(run, 'fit')
        report = {
            'converged': fit.converged,
            'message': fit.message,
            'iterations': fit.iterations,
            'cost': fit.cost,
            'verification_cost': fit.verification_cost,
            'free_parameters': fit.parameter_values(),
            'circuit': fit.params.to_dict(),
            'observations': [
                dict(row, predicted=float(p), residual=float(r))
                for row, p, r in zip(observations.to_rows(), fit.predictions, fit.residuals)
            ],
        }
        if fit.resonator is not None:
            report['resonator_coupling_row'] = list(fit.resonator.coupling_row)
        if fit.bootstrap is not None:
            report['bootstrap'] = {
                'requested': fit.bootstrap.requested,
                'failures': fit.bootstrap.failures,
                'parameters': fit.bootstrap.as_dict(),
            }
            samples = [dict(zip(fit.bootstrap.names, sample), sample=k)
                       for k, sample in enumerate(fit.bootstrap.samples)]
            write_csv(self._path(run, 'bootstrap_samples.csv'), samples,
                      ['sample'] + list(fit.bootstrap.names), metadata)
        path = write_yaml(self._path(run, 'fit_report.yaml'), report, metadata)
        status = 'converged' if fit.converged else 'NOT converged'
        print(f"fit: cost {fit.cost:.6g} after {fit.iterations} iterations ({status}) -> {path}")
        return EXIT_OK

    def cmd_validate(self, run: RunConfig, args) -> int:
        """Print PASS/FAIL/SKIP per self-check; exit 2 on any failure."""
        verdicts = run_validation(run)
        for verdict in verdicts:
            print(str(verdict))
        failed = [v for v in verdicts if v.failed]
        print(f"{len(verdicts) - len(failed)} of {len(verdicts)} checks passed or skipped")
        return EXIT_NUMERICAL if failed else EXIT_OK

    @staticmethod
    def _resonator(run: RunConfig):
        if run.resonator is None:
            raise InputError("this command needs a resonator section in the configuration")
        return run.resonator
