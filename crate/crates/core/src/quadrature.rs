//! Globally adaptive 21-point Gauss–Kronrod quadrature for vector-valued
//! integrands on a finite interval.
//!
//! All components share one subdivision, which keeps a ratio of integrals
//! (numerator and normalization) on the same nodes.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use crate::error::{Error, Result};

#[allow(clippy::excessive_precision)]
const XGK: [f64; 11] = [
    0.995_657_163_025_808_080_735_527_280_689,
    0.973_906_528_517_171_720_077_964_012_084,
    0.930_157_491_355_708_226_001_207_180_060,
    0.865_063_366_688_984_510_732_096_688_423,
    0.780_817_726_586_416_897_063_717_578_345,
    0.679_409_568_299_024_406_234_327_365_115,
    0.562_757_134_668_604_683_339_000_099_273,
    0.433_395_394_129_247_190_799_265_943_166,
    0.294_392_862_701_460_198_131_126_603_104,
    0.148_874_338_981_631_210_884_826_001_130,
    0.0,
];

#[allow(clippy::excessive_precision)]
const WGK: [f64; 11] = [
    0.011_694_638_867_371_874_278_064_396_062,
    0.032_558_162_307_964_727_478_818_972_459,
    0.054_755_896_574_351_996_031_381_300_245,
    0.075_039_674_810_919_952_767_043_140_916,
    0.093_125_454_583_697_605_535_065_465_083,
    0.109_387_158_802_297_641_899_210_590_326,
    0.123_491_976_262_065_851_077_600_525_800,
    0.134_709_217_311_473_325_928_054_001_772,
    0.142_775_938_577_060_080_797_094_273_139,
    0.147_739_104_901_338_491_374_841_515_972,
    0.149_445_554_002_916_905_664_936_468_390,
];

// 10-point Gauss weights for XGK[1], XGK[3], ..., XGK[9]
#[allow(clippy::excessive_precision)]
const WG: [f64; 5] = [
    0.066_671_344_308_688_137_593_568_809_893,
    0.149_451_349_150_580_593_145_776_339_658,
    0.219_086_362_515_982_043_995_534_934_228,
    0.269_266_719_309_996_355_091_226_921_569,
    0.295_524_224_714_752_870_173_892_994_651,
];

/// Stopping rule: the summed error estimate of every component must fall
/// below `max(absolute, relative · scale)`, where `scale` is the largest
/// component magnitude of the current estimate.
#[derive(Debug, Clone, Copy)]
pub struct Tolerance {
    pub relative: f64,
    pub absolute: f64,
    pub max_segments: usize,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            relative: 1e-6,
            absolute: 0.0,
            max_segments: 200_000,
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct Integral<const N: usize> {
    pub value: [f64; N],
    /// Summed per-component error estimate.
    pub error: [f64; N],
    pub evaluations: usize,
}

impl<const N: usize> Integral<N> {
    pub fn max_error(&self) -> f64 {
        self.error.iter().fold(0.0, |m, &e| m.max(e))
    }
}

#[derive(Debug, Clone, Copy)]
struct Segment<const N: usize> {
    a: f64,
    b: f64,
    value: [f64; N],
    error: [f64; N],
    priority: f64,
}

impl<const N: usize> PartialEq for Segment<N> {
    fn eq(&self, other: &Self) -> bool {
        self.priority == other.priority
    }
}

impl<const N: usize> Eq for Segment<N> {}

impl<const N: usize> PartialOrd for Segment<N> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<const N: usize> Ord for Segment<N> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.priority.total_cmp(&other.priority)
    }
}

fn kronrod<const N: usize, F>(f: &F, a: f64, b: f64) -> Segment<N>
where
    F: Fn(f64) -> [f64; N],
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kron = [0.0; N];
    let mut gauss = [0.0; N];
    for k in 0..N {
        kron[k] = WGK[10] * fc[k];
    }
    for (j, (&x, &w)) in XGK[..10].iter().zip(&WGK[..10]).enumerate() {
        let f1 = f(center - half * x);
        let f2 = f(center + half * x);
        for k in 0..N {
            let s = f1[k] + f2[k];
            kron[k] += w * s;
            if j % 2 == 1 {
                gauss[k] += WG[j / 2] * s;
            }
        }
    }
    let mut value = [0.0; N];
    let mut error = [0.0; N];
    for k in 0..N {
        value[k] = kron[k] * half;
        error[k] = ((kron[k] - gauss[k]) * half).abs();
    }
    let priority = error.iter().fold(0.0f64, |m, &e| m.max(e));
    Segment {
        a,
        b,
        value,
        error,
        priority,
    }
}

/// Integrates `f` over `[a, b]`, starting from `initial_panels` equal
/// panels and bisecting the worst panel until the tolerance is met.
pub fn integrate<const N: usize, F>(
    f: F,
    a: f64,
    b: f64,
    initial_panels: usize,
    tol: Tolerance,
) -> Result<Integral<N>>
where
    F: Fn(f64) -> [f64; N],
{
    if !(a.is_finite() && b.is_finite() && b > a) {
        return Err(Error::Domain(format!(
            "invalid integration interval [{a}, {b}]"
        )));
    }
    let panels = initial_panels.max(1);
    let width = (b - a) / panels as f64;
    let mut heap = BinaryHeap::with_capacity(panels * 2);
    for i in 0..panels {
        let lo = a + width * i as f64;
        let hi = if i + 1 == panels { b } else { lo + width };
        heap.push(kronrod(&f, lo, hi));
    }
    let mut evaluations = 21 * panels;

    let totals = |heap: &BinaryHeap<Segment<N>>| {
        let mut value = [0.0; N];
        let mut error = [0.0; N];
        for s in heap.iter() {
            for k in 0..N {
                value[k] += s.value[k];
                error[k] += s.error[k];
            }
        }
        (value, error)
    };

    let (mut value, mut error) = totals(&heap);
    loop {
        let scale = value.iter().fold(0.0f64, |m, &v| m.max(v.abs()));
        let target = tol.absolute.max(tol.relative * scale);
        let worst = error.iter().fold(0.0f64, |m, &e| m.max(e));
        if worst <= target {
            return Ok(Integral {
                value,
                error,
                evaluations,
            });
        }
        if heap.len() >= tol.max_segments {
            return Err(Error::Integration {
                estimate: worst,
                tolerance: target,
                nodes: evaluations,
            });
        }
        let seg = heap.pop().expect("heap is never empty");
        let mid = 0.5 * (seg.a + seg.b);
        if !(mid > seg.a && mid < seg.b) {
            // interval exhausted at machine precision
            return Err(Error::Integration {
                estimate: worst,
                tolerance: target,
                nodes: evaluations,
            });
        }
        let left = kronrod(&f, seg.a, mid);
        let right = kronrod(&f, mid, seg.b);
        evaluations += 42;
        for k in 0..N {
            value[k] += left.value[k] + right.value[k] - seg.value[k];
            error[k] += left.error[k] + right.error[k] - seg.error[k];
        }
        heap.push(left);
        heap.push(right);
        if heap.len() % 1024 == 0 {
            // resum to keep incremental round-off from accumulating
            (value, error) = totals(&heap);
        }
    }
}
