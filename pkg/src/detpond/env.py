"""Physical plant descriptions and their flow laws.

Two plants share one integration core:

  - a detention pond fed by an urban catchment acting as a linear
    reservoir: catchment storage S (mm) drains at rate k*S into the pond,
    so the pond inflow is k*S*1e-3*A_catchment*scale (m^3/min)
  - a bare test tank fed directly by the rain rate (inflow beta*rain),
    used by the small closed-form fixtures

Internally everything runs on volumes (m^3); levels in cm are a display
convention (volume / surface area).
"""

from dataclasses import dataclass

from .errors import ConfigError
from . import units


@dataclass(frozen=True)
class PondParams:
    """Detention pond and catchment geometry."""
    surface_area_m2: float = 5572.0
    max_level_cm: float = 300.0
    catchment_area_m2: float = 5900.0
    reaction_factor_per_min: float = 0.25
    inflow_scale: float = 1.0

    def __post_init__(self):
        for name in ("surface_area_m2", "max_level_cm", "catchment_area_m2",
                     "reaction_factor_per_min", "inflow_scale"):
            if getattr(self, name) <= 0.0:
                raise ConfigError(f"{name} must be positive")

    @property
    def capacity_m3(self):
        return units.level_cm_to_volume_m3(self.max_level_cm, self.surface_area_m2)

    @property
    def beta_m3_per_mm(self):
        """Pond volume produced per mm of water released by the catchment."""
        return 1e-3 * self.catchment_area_m2 * self.inflow_scale


@dataclass(frozen=True)
class TankParams:
    """Open-top test tank, rain falls straight in (no catchment)."""
    capacity_m3: float = 12.0
    outflow_open_m3_per_min: float = 8.0
    inflow_per_rain_unit: float = 1.0

    def __post_init__(self):
        if self.capacity_m3 <= 0.0 or self.outflow_open_m3_per_min <= 0.0:
            raise ConfigError("tank capacity and outflow must be positive")


def catchment_derivative(s_mm, rain_mm_per_min, params):
    """dS/dt of the linear-reservoir catchment storage."""
    return rain_mm_per_min - params.reaction_factor_per_min * s_mm


def catchment_inflow_m3_per_min(s_mm, params):
    """Pond inflow produced by catchment storage s_mm."""
    return params.reaction_factor_per_min * s_mm * params.beta_m3_per_mm


def pond_volume_derivative(w_cm, q_in, q_out, params):
    """dV/dt with the boundary cases at empty and full.

    At w == 0 a net outflow is cut to zero (nothing left to drain), at
    w == max_level a net inflow is cut to zero (excess leaves over the
    weir and is tracked by the overflow observer instead).
    """
    if w_cm <= 0.0 and q_out >= q_in:
        return 0.0
    if w_cm >= params.max_level_cm and q_in >= q_out:
        return 0.0
    return q_in - q_out


def overflow_derivative(w_cm, params):
    """do/dt: accumulates time while the pond sits at its rim."""
    return 1.0 if w_cm >= params.max_level_cm else 0.0


def cost_derivative(w_cm, params):
    """dc/dt: emptiness penalty, 1 when empty, 0 at the rim."""
    return 1.0 - w_cm / params.max_level_cm


@dataclass(frozen=True)
class Model:
    """Everything the integrator and the synthesizer need, in m^3/min.

    reservoir selects the catchment law (inflow beta*k*S) over the direct
    law (inflow beta*rain). axis2_max is the grid top for the second
    decision axis: catchment storage (mm) for the pond, the rain rate
    itself for the direct plant.
    """
    program: object
    modes_m3_per_min: tuple
    period_min: float
    dt_min: float
    horizon_min: float
    v_cap_m3: float
    area_m2: float
    beta_m3_per_mm: float
    k_per_min: float
    reservoir: bool
    axis2_max: float

    def __post_init__(self):
        object.__setattr__(self, "modes_m3_per_min",
                           tuple(float(q) for q in self.modes_m3_per_min))
        if any(q < 0.0 for q in self.modes_m3_per_min):
            raise ConfigError("outflow modes must be nonnegative")
        if list(self.modes_m3_per_min) != sorted(self.modes_m3_per_min):
            raise ConfigError("outflow modes must be listed ascending")
        if self.dt_min <= 0.0 or self.period_min <= 0.0 or self.horizon_min <= 0.0:
            raise ConfigError("dt, period and horizon must be positive")
        if abs(self.period_min / self.dt_min - round(self.period_min / self.dt_min)) > 1e-9:
            raise ConfigError("period must be a whole number of dt steps")
        if abs(self.horizon_min / self.period_min - round(self.horizon_min / self.period_min)) > 1e-9:
            raise ConfigError("horizon must be a whole number of periods")

    @property
    def n_periods(self):
        return int(round(self.horizon_min / self.period_min))

    @property
    def steps_per_period(self):
        return int(round(self.period_min / self.dt_min))

    @property
    def max_level_cm(self):
        return units.volume_m3_to_level_cm(self.v_cap_m3, self.area_m2)

    def level_to_volume(self, w_cm):
        return units.level_cm_to_volume_m3(w_cm, self.area_m2)

    def volume_to_level(self, v_m3):
        return units.volume_m3_to_level_cm(v_m3, self.area_m2)


def pond_model(params, modes_m3_per_min, program, period_min=60.0,
               dt_min=0.5, horizon_min=4320.0):
    """Bundle a pond + catchment + weather into a Model."""
    axis2_max = 2.0 * program.max_intensity() / params.reaction_factor_per_min
    return Model(
        program=program,
        modes_m3_per_min=tuple(modes_m3_per_min),
        period_min=period_min,
        dt_min=dt_min,
        horizon_min=horizon_min,
        v_cap_m3=params.capacity_m3,
        area_m2=params.surface_area_m2,
        beta_m3_per_mm=params.beta_m3_per_mm,
        k_per_min=params.reaction_factor_per_min,
        reservoir=True,
        axis2_max=axis2_max,
    )


def tank_model(params, program, period_min=1.0, dt_min=0.5, horizon_min=6.0):
    """Bundle the direct-inflow test tank into a Model.

    The tank's "level" is its volume itself (surface area 100 makes the
    cm-level numerically equal to the volume in m^3).
    """
    return Model(
        program=program,
        modes_m3_per_min=(0.0, params.outflow_open_m3_per_min),
        period_min=period_min,
        dt_min=dt_min,
        horizon_min=horizon_min,
        v_cap_m3=params.capacity_m3,
        area_m2=100.0,
        beta_m3_per_mm=params.inflow_per_rain_unit,
        k_per_min=0.0,
        reservoir=False,
        axis2_max=program.max_intensity(),
    )
