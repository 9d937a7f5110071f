//! Visible spherical cap geometry and its equivalent planar annulus.
//!
//! All lengths are kilometres and densities are per square kilometre.

use std::f64::consts::PI;

use crate::error::{check_range, Error, Result};

pub const DEFAULT_EARTH_RADIUS_KM: f64 = 6371.0;

/// Earth sphere, satellite sphere and the tangent-plane visibility cut.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SphereGeometry {
    earth_radius: f64,
    orbit_radius: f64,
    min_visibility_altitude: f64,
}

impl SphereGeometry {
    pub fn new(earth_radius: f64, orbit_radius: f64, min_visibility_altitude: f64) -> Result<Self> {
        if !(earth_radius > 0.0 && earth_radius.is_finite()) {
            return Err(Error::invalid("earth_radius", format!("must be positive, got {earth_radius}")));
        }
        if !(orbit_radius > earth_radius && orbit_radius.is_finite()) {
            return Err(Error::invalid(
                "orbit_radius",
                format!("must exceed the earth radius {earth_radius}, got {orbit_radius}"),
            ));
        }
        let shell = orbit_radius - earth_radius;
        if !(min_visibility_altitude >= 0.0 && min_visibility_altitude < shell) {
            return Err(Error::invalid(
                "min_visibility_altitude",
                format!("must lie in [0, {shell}), got {min_visibility_altitude}"),
            ));
        }
        Ok(Self {
            earth_radius,
            orbit_radius,
            min_visibility_altitude,
        })
    }

    /// Geometry with the satellite shell `altitude` km above a default Earth.
    pub fn with_altitude(altitude: f64, min_visibility_altitude: f64) -> Result<Self> {
        Self::new(
            DEFAULT_EARTH_RADIUS_KM,
            DEFAULT_EARTH_RADIUS_KM + altitude,
            min_visibility_altitude,
        )
    }

    pub fn earth_radius(&self) -> f64 {
        self.earth_radius
    }

    pub fn orbit_radius(&self) -> f64 {
        self.orbit_radius
    }

    pub fn min_visibility_altitude(&self) -> f64 {
        self.min_visibility_altitude
    }

    /// Closest possible satellite distance (satellite at zenith).
    pub fn r_min(&self) -> f64 {
        self.orbit_radius - self.earth_radius
    }

    /// Farthest visible satellite distance (on the visibility plane).
    pub fn r_max(&self) -> f64 {
        let (rs, re) = (self.orbit_radius, self.earth_radius);
        (rs * rs - re * re - 2.0 * re * self.min_visibility_altitude).sqrt()
    }

    /// Height above the station of the plane cutting the cap of radius `r`.
    pub fn cap_plane_height(&self, r: f64) -> f64 {
        let (rs, re) = (self.orbit_radius, self.earth_radius);
        ((rs * rs - re * re) - r * r) / (2.0 * re)
    }

    /// Total satellite-sphere area, used to draw the constellation size.
    pub fn shell_area(&self) -> f64 {
        4.0 * PI * self.orbit_radius * self.orbit_radius
    }
}

/// Area of the visible cap, `2 pi (R_S - R_E - h_E) R_S`.
pub fn visible_cap_area(geom: &SphereGeometry) -> f64 {
    2.0 * PI * (geom.r_min() - geom.min_visibility_altitude) * geom.orbit_radius
}

/// Area of the part of the cap within distance `r` of the station.
pub fn cap_area_within(geom: &SphereGeometry, r: f64) -> Result<f64> {
    check_range("r", r, geom.r_min(), geom.r_max())?;
    let h = geom.cap_plane_height(r);
    Ok((2.0 * PI * (geom.r_min() - h) * geom.orbit_radius).max(0.0))
}

/// Satellite density that puts `mean_visible` satellites on the visible cap.
pub fn density_for_mean_visible(geom: &SphereGeometry, mean_visible: f64) -> f64 {
    mean_visible / visible_cap_area(geom)
}

/// Planar annulus `R_min <= r <= R_max` carrying a homogeneous PPP.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RingGeometry {
    r_min: f64,
    r_max: f64,
    density: f64,
}

impl RingGeometry {
    pub fn new(r_min: f64, r_max: f64, density: f64) -> Result<Self> {
        if !(r_min > 0.0 && r_min <= r_max && r_max.is_finite()) {
            return Err(Error::invalid(
                "ring radii",
                format!("need 0 < r_min <= r_max, got [{r_min}, {r_max}]"),
            ));
        }
        if !(density >= 0.0 && density.is_finite()) {
            return Err(Error::invalid("density", format!("must be >= 0, got {density}")));
        }
        Ok(Self { r_min, r_max, density })
    }

    pub fn r_min(&self) -> f64 {
        self.r_min
    }

    pub fn r_max(&self) -> f64 {
        self.r_max
    }

    pub fn density(&self) -> f64 {
        self.density
    }

    /// `lambda~ * pi`, the factor that turns squared radii into Poisson means.
    pub fn lambda_pi(&self) -> f64 {
        self.density * PI
    }

    pub fn area(&self) -> f64 {
        PI * (self.r_max * self.r_max - self.r_min * self.r_min)
    }

    pub fn area_within(&self, r: f64) -> Result<f64> {
        check_range("r", r, self.r_min, self.r_max)?;
        Ok(PI * (r * r - self.r_min * self.r_min))
    }

    /// Mean number of points in the annulus.
    pub fn mean_count(&self) -> f64 {
        self.density * self.area()
    }

    /// Poisson mean of the annulus between `r_min` and `r` (unchecked).
    pub(crate) fn mean_inside(&self, r: f64) -> f64 {
        self.lambda_pi() * (r * r - self.r_min * self.r_min)
    }

    /// Poisson mean of the annulus between `r` and `r_max` (unchecked).
    pub(crate) fn mean_outside(&self, r: f64) -> f64 {
        self.lambda_pi() * (self.r_max * self.r_max - r * r)
    }

    /// Smallest admissible relative distance `R_min / R_max`.
    pub fn min_delta(&self) -> f64 {
        self.r_min / self.r_max
    }
}

/// Replaces the cap process of density `lambda` with the annulus process of
/// density `lambda R_S / R_E`; both have identical void probabilities.
pub fn to_ring(geom: &SphereGeometry, lambda: f64) -> Result<RingGeometry> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::invalid("lambda", format!("must be >= 0, got {lambda}")));
    }
    RingGeometry::new(
        geom.r_min(),
        geom.r_max(),
        lambda * geom.orbit_radius / geom.earth_radius,
    )
}
