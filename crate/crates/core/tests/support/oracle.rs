//! Straight-line reference pipeline: per-pixel loops, trigonometry for every
//! neighbor, no tables, no caching. Shares no code with the library beyond
//! `GrayImage` storage.

use std::f64::consts::PI;

use cldp_core::GrayImage;

const SNAP: f64 = 1e-6;
const ZERO: f64 = 1e-10;

fn axis(v: f64) -> Vec<(i64, f64)> {
    let r = v.round();
    if (v - r).abs() < SNAP {
        vec![(r as i64, 1.0)]
    } else {
        let f = v.floor();
        vec![(f as i64, 1.0 - (v - f)), (f as i64 + 1, v - f)]
    }
}

/// `d_p` for every neighbor of `(cx, cy)`.
pub fn differences(img: &GrayImage, cx: usize, cy: usize, p: usize, r: f64) -> Vec<f64> {
    let center = img.get(cx, cy);
    (0..p)
        .map(|k| {
            let theta = 2.0 * PI * k as f64 / p as f64;
            let (dx, dy) = (-r * theta.sin(), r * theta.cos());
            let mut d = 0.0;
            let mut mass = 0.0;
            for (ox, wx) in axis(dx) {
                for (oy, wy) in axis(dy) {
                    let v = img.get((cx as i64 + ox) as usize, (cy as i64 + oy) as usize);
                    let term = wx * wy * (v - center);
                    d += term;
                    mass += term.abs();
                }
            }
            if d.abs() <= ZERO * mass {
                0.0
            } else {
                d
            }
        })
        .collect()
}

pub fn riu2(bits: &[bool]) -> usize {
    let p = bits.len();
    let changes = (0..p).filter(|&i| bits[i] != bits[(i + 1) % p]).count();
    if changes <= 2 {
        bits.iter().filter(|&&b| b).count()
    } else {
        p + 1
    }
}

/// Normalized histogram of `scheme` (optional `CLBP_`/`CLDP_` prefix, `_` and `/`).
pub fn histogram(img: &GrayImage, p: usize, r: f64, scheme: &str) -> Vec<f64> {
    let m = r.ceil() as usize;
    let (w, h) = (img.width(), img.height());
    let centers: Vec<(usize, usize)> = (m..h - m).flat_map(|y| (m..w - m).map(move |x| (x, y))).collect();

    let outer: Vec<Vec<f64>> = centers.iter().map(|&(x, y)| differences(img, x, y, p, r)).collect();
    let inner: Vec<Vec<f64>> = centers.iter().map(|&(x, y)| differences(img, x, y, p, r - 1.0)).collect();
    let mut total = 0.0;
    for d in outer.iter().flatten() {
        total += d.abs();
    }
    let c_m = total / (centers.len() * p) as f64;
    let mut pixel_sum = 0.0;
    for v in img.data() {
        pixel_sum += v;
    }
    let c_i = pixel_sum / img.data().len() as f64;

    let value = |component: char, i: usize| -> (usize, usize) {
        match component {
            'S' => (riu2(&outer[i].iter().map(|&d| d >= 0.0).collect::<Vec<_>>()), p + 2),
            'M' => (riu2(&outer[i].iter().map(|&d| d.abs() >= c_m).collect::<Vec<_>>()), p + 2),
            'D' => {
                let bits: Vec<bool> = outer[i].iter().zip(&inner[i]).map(|(&a, &b)| (a >= 0.0) != (b >= 0.0)).collect();
                (riu2(&bits), p + 2)
            }
            'C' => {
                let (x, y) = centers[i];
                (usize::from(img.get(x, y) >= c_i), 2)
            }
            other => panic!("unknown component {other}"),
        }
    };

    let body = scheme.trim_start_matches("CLBP_").trim_start_matches("CLDP_");
    let mut out = Vec::new();
    for group in body.split('_') {
        let members: Vec<char> = group.split('/').map(|s| s.chars().next().unwrap()).collect();
        let size: usize = members.iter().map(|&c| if c == 'C' { 2 } else { p + 2 }).product();
        let mut counts = vec![0u64; size];
        for i in 0..centers.len() {
            let mut index = 0;
            for &c in &members {
                let (v, radix) = value(c, i);
                index = index * radix + v;
            }
            counts[index] += 1;
        }
        out.extend(counts.iter().map(|&c| c as f64 / centers.len() as f64));
    }
    out
}
