"""Simulation and calibration of mode-sorted (SPADE) optical readout of nanomechanical torsion modes."""

from .calibration import (CalibrationResult, FitReport, area_scan_model, calibrate_spectrum, fit_coupling_model,
                          fit_knife_edge, fit_ringdown, fit_shot_scaling)
from .config import ExperimentConfig
from .errors import ConfigError, FitError, ModeshapeParseError, NegativeImprecisionError
from .hg import ComplexField, GridSpec, OpticalMode, eval_hg, inner_product, sample_mode
from .limits import (BeamParams, CoolingLimit, PhononBudget, backaction_force, backaction_torque, cooling_limit,
                     imprecision_angle, imprecision_displacement, phonon_budget, zero_point_psd,
                     zero_point_psd_resonant)
from .mechanics import (MechanicalMode, ModeShape, RibbonGeometry, eval_shape, flexural_shape, grad_shape,
                        gridded_shape, load_grid_shape, torsion_shape)
from .misalignment import (EfficiencyResult, MisalignConfig, coupling_efficiency, detection_modes,
                           efficiency_closed_form, efficiency_numeric, hg00_imprecision)
from .overlap import CouplingResult, ScatteringState, coupling_scan, couplings, reflected_field
from .spectra import (NoiseModel, RingdownRecord, SpectrumRecord, model_psd, synth_periodogram, synth_ringdown,
                      thermal_psd)

__version__ = "0.1.0"
