//! Deterministic synthetic test images: piecewise-constant shapes on a
//! smooth background, with one textured patch.

use redbp_core::image::GaussianStream;
use redbp_core::Image;

pub fn synthetic_image(size: usize, seed: u64) -> Image<f64> {
    let mut rng = GaussianStream::new(seed ^ 0x5157_4e7e_71c0_0000);
    let mut u = move || rng.next_uniform();
    let n = size as f64;

    let (g0, gx, gy) = (60.0 + 60.0 * u(), 60.0 * (u() - 0.5), 60.0 * (u() - 0.5));
    let mut img = Image::from_fn(size, size, |r, c| {
        g0 + gx * c as f64 / n + gy * r as f64 / n
    });

    for _ in 0..4 {
        let (r0, c0) = ((u() * n * 0.7) as usize, (u() * n * 0.7) as usize);
        let (hh, ww) = (
            ((0.15 + 0.35 * u()) * n) as usize,
            ((0.15 + 0.35 * u()) * n) as usize,
        );
        let v = 20.0 + 215.0 * u();
        for r in r0..(r0 + hh).min(size) {
            for c in c0..(c0 + ww).min(size) {
                img.set(r, c, v);
            }
        }
    }

    for _ in 0..3 {
        let (cr, cc, rad) = (u() * n, u() * n, (0.08 + 0.17 * u()) * n);
        let v = 20.0 + 215.0 * u();
        for r in 0..size {
            for c in 0..size {
                let (dr, dc) = (r as f64 + 0.5 - cr, c as f64 + 0.5 - cc);
                if dr * dr + dc * dc <= rad * rad {
                    img.set(r, c, v);
                }
            }
        }
    }

    // textured patch: oriented sinusoid
    let (tr, tc, ts) = ((u() * n * 0.6) as usize, (u() * n * 0.6) as usize, (0.3 * n) as usize);
    let (freq, theta, amp) = (0.15 + 0.35 * u(), std::f64::consts::PI * u(), 25.0 + 25.0 * u());
    for r in tr..(tr + ts).min(size) {
        for c in tc..(tc + ts).min(size) {
            let phase = freq * (c as f64 * theta.cos() + r as f64 * theta.sin());
            img.set(r, c, img.get(r, c) + amp * (2.0 * std::f64::consts::PI * phase).sin());
        }
    }
    img.map(|v| v.clamp(0.0, 255.0))
}
