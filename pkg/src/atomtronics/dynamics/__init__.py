from .classical import AtomEnsemble, ClassicalIntegrator, sample_ensemble, step_classical, total_energy
from .observables import density
from .potentials import (
    BEAMS,
    PotentialStack,
    RampSchedule,
    apply_ramp,
    co2_potential,
    default_ramp,
    max_trap_frequency,
)
from .wave import (
    SplitStepPropagator,
    Wavefunction,
    absorbing_mask,
    energy,
    evolve_wave,
    gaussian_packet,
    ground_state,
    thermal_field,
)

__all__ = [
    "AtomEnsemble", "ClassicalIntegrator", "sample_ensemble", "step_classical", "total_energy",
    "density", "BEAMS", "PotentialStack", "RampSchedule", "apply_ramp", "co2_potential",
    "default_ramp", "max_trap_frequency", "SplitStepPropagator", "Wavefunction", "absorbing_mask",
    "energy", "evolve_wave", "gaussian_packet", "ground_state", "thermal_field",
]
