"""Physical constants shared across modules (SI unless noted)."""

SPEED_OF_LIGHT = 299792458.0        # m/s
BOLTZMANN = 1.380649e-23            # J/K
EARTH_MU_KM3_S2 = 398600.4418       # km^3/s^2, gravitational parameter
EARTH_RADIUS_KM = 6371.0            # mean spherical radius
