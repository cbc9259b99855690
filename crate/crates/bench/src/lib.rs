//! Shared inputs for the benchmarks.

use unilight_core::envmap::Vec3;
use unilight_core::EquirectMap;

/// A panorama with one sharp light and a soft sky gradient.
pub fn sun_panorama(width: usize) -> EquirectMap {
    let l = Vec3::new(0.5, 0.6, 0.62).normalize();
    EquirectMap::from_direction_fn(width, width / 2, |d| {
        let s = 200.0 * (80.0 * (d.dot(&l) - 1.0)).exp() + 0.4 * (1.0 + d.y) + 0.05;
        [s as f32, 0.9 * s as f32, 0.75 * s as f32]
    })
    .expect("valid panorama")
}
