"""Klein paradox for the Klein-Gordon equation at a potential step."""
from .analytic import (
    AntiparticleView,
    ScatteringSolution,
    WaveCurrents,
    antiparticle_relabel,
    check_current_balance,
    momentum_averaged_reflectivity,
    reflectivity,
    select_pprime_branch,
    solve_step,
    wave_currents,
)
from .core import (
    DomainError,
    ParticleParams,
    Regime,
    StepPotential,
    classify_regime,
    group_velocity,
    momentum_from_energy,
    transmitted_momentum_squared,
)

__version__ = "0.1.0"
