//! Decibel and unit conversions. Every dB/linear conversion in the crate
//! goes through here.

/// Speed of light in vacuum [m/s].
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

pub const METERS_PER_KM: f64 = 1e3;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn linear_to_db(x: f64) -> f64 {
    10.0 * x.log10()
}

/// dBm to watts.
pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

/// Free-space constant `20 log10(c / (4 pi f_c))` in dB, wavelength in meters.
pub fn free_space_constant_db(carrier_hz: f64) -> f64 {
    20.0 * (SPEED_OF_LIGHT / (4.0 * std::f64::consts::PI * carrier_hz)).log10()
}

pub fn km_to_m(km: f64) -> f64 {
    km * METERS_PER_KM
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn reference_points() {
        assert_eq!(db_to_linear(0.0), 1.0);
        assert!((db_to_linear(10.0) - 10.0).abs() < 1e-12);
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((dbm_to_watts(43.0) - 19.952_623_149_688_8).abs() < 1e-9);
        // -174 dBm/Hz over 100 MHz
        let n = dbm_to_watts(-174.0) * 100e6;
        assert!((watts_to_dbm(n) + 94.0).abs() < 1e-9);
    }

    #[test]
    fn free_space_constant_at_ku_band() {
        // c / (4 pi 13.5 GHz) = 1.7672e-3 m
        let v = free_space_constant_db(13.5e9);
        assert!((v + 55.0545).abs() < 1e-3, "{v}");
    }

    proptest! {
        #[test]
        fn db_round_trip(x in 1e-12f64..1e12) {
            let back = db_to_linear(linear_to_db(x));
            prop_assert!((back - x).abs() <= 1e-12 * x);
        }

        #[test]
        fn dbm_round_trip(dbm in -200f64..100.0) {
            prop_assert!((watts_to_dbm(dbm_to_watts(dbm)) - dbm).abs() < 1e-9);
        }
    }
}
