//! Asynchronous multiuser uplink synthesis: per-device packets, Rayleigh block
//! fading onto L antennas, AWGN, and superposition into per-antenna sample streams.
//!
//! Every device transmits at unit power; its channel vector h_u has i.i.d. CN(0,1)
//! entries held constant for the whole trial (block fading). Sample (n, ℓ) of the
//! received stream is Σ_u h_{u,ℓ}·x_u[n − toa_u] + ω with ω ~ CN(0, σ²), so the
//! per-sample SNR of one device at one antenna is 1/σ².

use crate::css::ChirpTable;
use crate::error::{Error, Result};
use crate::preamble::{build_preamble_symbol, PreambleAssignment};
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use std::io::{BufWriter, Read, Write};
use std::path::Path;

/// Block-fading channel from one device to the L gateway antennas.
#[derive(Clone, Debug)]
pub struct ChannelVector {
    pub gains: Vec<Complex64>,
}

/// One device's transmission in a trial: arrival time and symbol content.
#[derive(Clone, Debug)]
pub struct PacketPlan {
    pub ed_id: usize,
    pub toa: usize,
    pub payload_symbols: Vec<usize>,
    pub assignment: PreambleAssignment,
    pub n_preamble: usize,
}

/// Per-antenna received sample sequences plus the noise level they were built with.
#[derive(Clone, Debug)]
pub struct ReceptionStream {
    pub samples: Vec<Vec<Complex64>>,
    pub t: usize,
    pub noise_var: f64,
}

impl ReceptionStream {
    pub fn antennas(&self) -> usize {
        self.samples.len()
    }
}

/// Draws h ~ CN(0, I_L): independent zero-mean unit-variance complex Gaussians.
pub fn draw_channel<R: Rng>(l_antennas: usize, rng: &mut R) -> ChannelVector {
    let s = 0.5f64.sqrt();
    let gains = (0..l_antennas)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * s, im * s)
        })
        .collect();
    ChannelVector { gains }
}

/// Packet arrival times: the first at the warm-up offset, then gaps drawn from an
/// exponential law with the given mean (in samples), rounded to whole samples.
pub fn draw_toas<R: Rng>(
    n_users: usize,
    mean_gap: f64,
    warmup: usize,
    rng: &mut R,
) -> Vec<usize> {
    let exp = Exp::new(1.0 / mean_gap).expect("positive mean gap");
    let mut toas = Vec::with_capacity(n_users);
    let mut t = warmup;
    for _ in 0..n_users {
        toas.push(t);
        t += exp.sample(rng).round() as usize;
    }
    toas
}

/// Renders a packet waveform: N preamble symbols followed by the given payload
/// chirps, (n_preamble + payload) · M samples at unit power.
pub fn render_packet(
    assignment: &PreambleAssignment,
    n_preamble: usize,
    payload_symbols: &[usize],
    table: &ChirpTable,
) -> Result<Vec<Complex64>> {
    let m = table.m();
    let symbol = build_preamble_symbol(assignment, table)?;
    let mut out = Vec::with_capacity((n_preamble + payload_symbols.len()) * m);
    for _ in 0..n_preamble {
        out.extend_from_slice(&symbol);
    }
    for &c in payload_symbols {
        if c >= m {
            return Err(Error::Config(format!("payload chirp index {c} out of range")));
        }
        out.extend_from_slice(table.chirp(c));
    }
    Ok(out)
}

/// Renders a packet with uniformly random payload chirps.
pub fn build_packet<R: Rng>(
    assignment: &PreambleAssignment,
    n_preamble: usize,
    payload_len: usize,
    rng: &mut R,
    table: &ChirpTable,
) -> Result<Vec<Complex64>> {
    let m = table.m();
    let payload: Vec<usize> = (0..payload_len).map(|_| rng.gen_range(0..m)).collect();
    render_packet(assignment, n_preamble, &payload, table)
}

/// Superposes all packets through their channels and adds CN(0, σ²) noise.
///
/// The noise is drawn unit-variance and scaled by σ, so two runs from identical
/// generator states differ only by the scale when σ² changes.
pub fn synthesize<R: Rng>(
    packets: &[PacketPlan],
    channels: &[ChannelVector],
    noise_var: f64,
    l_antennas: usize,
    t: usize,
    table: &ChirpTable,
    rng: &mut R,
) -> Result<ReceptionStream> {
    if packets.len() != channels.len() {
        return Err(Error::Dimension(format!(
            "{} packets but {} channel vectors",
            packets.len(),
            channels.len()
        )));
    }
    for ch in channels {
        if ch.gains.len() != l_antennas {
            return Err(Error::Dimension(format!(
                "channel vector has {} gains, expected {l_antennas}",
                ch.gains.len()
            )));
        }
    }
    let noise_scale = (noise_var / 2.0).sqrt();
    let mut samples = Vec::with_capacity(l_antennas);
    for _ in 0..l_antennas {
        let mut lane = Vec::with_capacity(t);
        for _ in 0..t {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            lane.push(Complex64::new(re * noise_scale, im * noise_scale));
        }
        samples.push(lane);
    }
    for (packet, channel) in packets.iter().zip(channels) {
        let waveform = render_packet(
            &packet.assignment,
            packet.n_preamble,
            &packet.payload_symbols,
            table,
        )?;
        let end = packet.toa + waveform.len();
        if end > t {
            return Err(Error::Config(format!(
                "ED {} packet spans [{}, {end}) beyond stream length {t}",
                packet.ed_id, packet.toa
            )));
        }
        for (lane, h) in samples.iter_mut().zip(&channel.gains) {
            for (slot, x) in lane[packet.toa..end].iter_mut().zip(&waveform) {
                *slot += h * x;
            }
        }
    }
    Ok(ReceptionStream {
        samples,
        t,
        noise_var,
    })
}

/// Little-endian binary dump: 32-byte header (magic "CNIQ", version u32 = 1,
/// L u32, T u32, M u32, reserved u32 = 0, σ² f64) followed by antenna-major
/// interleaved (re, im) f64 pairs.
pub fn write_stream(stream: &ReceptionStream, m: usize, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(std::fs::File::create(path)?);
    w.write_all(b"CNIQ")?;
    w.write_all(&1u32.to_le_bytes())?;
    w.write_all(&(stream.antennas() as u32).to_le_bytes())?;
    w.write_all(&(stream.t as u32).to_le_bytes())?;
    w.write_all(&(m as u32).to_le_bytes())?;
    w.write_all(&0u32.to_le_bytes())?;
    w.write_all(&stream.noise_var.to_le_bytes())?;
    for lane in &stream.samples {
        for s in lane {
            w.write_all(&s.re.to_le_bytes())?;
            w.write_all(&s.im.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Reads a stream dump back; returns the stream and the M recorded in the header.
pub fn read_stream(path: &Path) -> Result<(ReceptionStream, usize)> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut bytes)?;
    if bytes.len() < 32 || &bytes[0..4] != b"CNIQ" {
        return Err(Error::Config("not a stream dump (bad magic)".into()));
    }
    let u32_at = |o: usize| u32::from_le_bytes(bytes[o..o + 4].try_into().unwrap()) as usize;
    let version = u32_at(4);
    if version != 1 {
        return Err(Error::Config(format!("unsupported dump version {version}")));
    }
    let (l, t, m) = (u32_at(8), u32_at(12), u32_at(16));
    let noise_var = f64::from_le_bytes(bytes[24..32].try_into().unwrap());
    let expected = 32 + l * t * 16;
    if bytes.len() != expected {
        return Err(Error::Config(format!(
            "dump length {} does not match header ({expected} expected)",
            bytes.len()
        )));
    }
    let mut samples = Vec::with_capacity(l);
    let mut off = 32;
    for _ in 0..l {
        let mut lane = Vec::with_capacity(t);
        for _ in 0..t {
            let re = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            let im = f64::from_le_bytes(bytes[off + 8..off + 16].try_into().unwrap());
            lane.push(Complex64::new(re, im));
            off += 16;
        }
        samples.push(lane);
    }
    Ok((
        ReceptionStream {
            samples,
            t,
            noise_var,
        },
        m,
    ))
}
