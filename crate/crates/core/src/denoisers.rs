//! The plug-in denoiser `J` and an empirical firm-nonexpansiveness check.

use std::fmt;
use std::io::{BufReader, BufWriter, Write};
use std::net::TcpStream;
use std::process::{Child, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::thread;
use std::time::Duration;

use log::{debug, warn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::prox::{L1Dct, ProxFn};
use crate::protocol::{read_frame, write_frame, Frame};
use crate::rng::Rng;
use crate::scalar::Scalar;
use crate::tensor::{ImageBuffer, Shape};

pub const TIMEOUT_ENV: &str = "PNPPDS_DENOISER_TIMEOUT_S";
pub const DEFAULT_TIMEOUT_S: f64 = 30.0;

pub trait Denoiser<T: Scalar>: Send {
    fn denoise(&mut self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>>;
    fn descriptor(&self) -> String;
    /// Whether the implementation claims to be firmly nonexpansive.
    fn declared_fne(&self) -> bool;
}

impl<T: Scalar, D: Denoiser<T> + ?Sized> Denoiser<T> for Box<D> {
    fn denoise(&mut self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        (**self).denoise(x)
    }
    fn descriptor(&self) -> String {
        (**self).descriptor()
    }
    fn declared_fne(&self) -> bool {
        (**self).declared_fne()
    }
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityDenoiser;

impl<T: Scalar> Denoiser<T> for IdentityDenoiser {
    fn denoise(&mut self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        Ok(x.clone())
    }
    fn descriptor(&self) -> String {
        "identity".into()
    }
    fn declared_fne(&self) -> bool {
        true
    }
}

/// Soft-thresholding of the per-channel orthonormal 2-D DCT coefficients.
#[derive(Debug, Clone)]
pub struct DctSoftThreshold<T> {
    threshold: T,
    cached: Option<(Shape, L1Dct<T>)>,
}

impl<T: Scalar> DctSoftThreshold<T> {
    pub fn new(threshold: T) -> Result<Self> {
        if !(threshold >= T::zero()) {
            return Err(Error::invalid(format!("threshold must be nonnegative, got {threshold}")));
        }
        Ok(DctSoftThreshold {
            threshold,
            cached: None,
        })
    }

    pub fn threshold(&self) -> T {
        self.threshold
    }
}

impl<T: Scalar> Denoiser<T> for DctSoftThreshold<T> {
    fn denoise(&mut self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        let shape = x.shape();
        let plane = Shape::gray(shape.width, shape.height);
        if self.cached.as_ref().map(|(s, _)| *s) != Some(plane) {
            self.cached = Some((plane, L1Dct::new(T::one(), plane)?));
        }
        self.cached.as_ref().unwrap().1.shrink(self.threshold, x)
    }
    fn descriptor(&self) -> String {
        format!("dct-soft-threshold(t={})", self.threshold)
    }
    fn declared_fne(&self) -> bool {
        true
    }
}

/// `prox_{gamma F}` used as a denoiser.
pub struct ProxDenoiser<T, P> {
    prox: P,
    gamma: T,
}

impl<T: Scalar, P: ProxFn<T>> ProxDenoiser<T, P> {
    pub fn new(prox: P, gamma: T) -> Result<Self> {
        if !(gamma > T::zero()) {
            return Err(Error::invalid("prox index must be positive"));
        }
        Ok(ProxDenoiser { prox, gamma })
    }

    pub fn prox(&self) -> &P {
        &self.prox
    }
}

impl<T: Scalar, P: ProxFn<T>> Denoiser<T> for ProxDenoiser<T, P> {
    fn denoise(&mut self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        self.prox.prox(self.gamma, x)
    }
    fn descriptor(&self) -> String {
        format!("prox[{}](gamma={})", self.prox.describe(), self.gamma)
    }
    fn declared_fne(&self) -> bool {
        true
    }
}

/// `x -> factor * x`. Firmly nonexpansive only for `factor` in `[0, 1]`; any
/// other factor is a deliberately broken denoiser for tests.
#[derive(Debug, Clone, Copy)]
pub struct ScaledDenoiser<T> {
    factor: T,
}

impl<T: Scalar> ScaledDenoiser<T> {
    pub fn new(factor: T) -> Self {
        ScaledDenoiser { factor }
    }
}

impl<T: Scalar> Denoiser<T> for ScaledDenoiser<T> {
    fn denoise(&mut self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        Ok(x.scale(self.factor))
    }
    fn descriptor(&self) -> String {
        format!("scaled(factor={})", self.factor)
    }
    fn declared_fne(&self) -> bool {
        self.factor >= T::zero() && self.factor <= T::one()
    }
}

/// Where an external denoiser lives.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Endpoint {
    /// `tcp://host:port`
    Tcp(String),
    /// `unix:/path/to/socket`
    #[cfg(unix)]
    Unix(std::path::PathBuf),
    /// `exec:command line`, spoken over the child's stdin/stdout.
    Exec(String),
}

impl Endpoint {
    pub fn parse(s: &str) -> Result<Self> {
        if let Some(addr) = s.strip_prefix("tcp://") {
            if addr.is_empty() {
                return Err(Error::invalid("empty tcp address"));
            }
            return Ok(Endpoint::Tcp(addr.to_string()));
        }
        #[cfg(unix)]
        if let Some(path) = s.strip_prefix("unix:") {
            return Ok(Endpoint::Unix(path.into()));
        }
        if let Some(cmd) = s.strip_prefix("exec:") {
            if cmd.trim().is_empty() {
                return Err(Error::invalid("empty exec command"));
            }
            return Ok(Endpoint::Exec(cmd.to_string()));
        }
        Err(Error::invalid(format!(
            "endpoint {s:?} must start with tcp://, unix: or exec:"
        )))
    }
}

impl fmt::Display for Endpoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Endpoint::Tcp(a) => write!(f, "tcp://{a}"),
            #[cfg(unix)]
            Endpoint::Unix(p) => write!(f, "unix:{}", p.display()),
            Endpoint::Exec(c) => write!(f, "exec:{c}"),
        }
    }
}

/// Per-request timeout: `PNPPDS_DENOISER_TIMEOUT_S` if set and valid, else 30 s.
pub fn timeout_from_env() -> Duration {
    match std::env::var(TIMEOUT_ENV) {
        Ok(raw) => match raw.trim().parse::<f64>() {
            Ok(s) if s > 0.0 && s.is_finite() => Duration::from_secs_f64(s),
            _ => {
                warn!("ignoring invalid {TIMEOUT_ENV}={raw:?}");
                Duration::from_secs_f64(DEFAULT_TIMEOUT_S)
            }
        },
        Err(_) => Duration::from_secs_f64(DEFAULT_TIMEOUT_S),
    }
}

/// Client for a denoiser speaking the wire protocol. One request in flight at
/// a time. Values cross the wire as f32, so f64 inputs are rounded.
pub struct ExternalDenoiser {
    endpoint: String,
    writer: Box<dyn Write + Send>,
    responses: Receiver<Result<Frame>>,
    child: Option<Child>,
    timeout: Duration,
    broken: bool,
    declared_fne: bool,
    bytes_sent: usize,
    bytes_received: usize,
}

impl ExternalDenoiser {
    pub fn connect(endpoint: &Endpoint, timeout: Duration) -> Result<Self> {
        let name = endpoint.to_string();
        let (writer, reader, child): (Box<dyn Write + Send>, Box<dyn std::io::Read + Send>, _) =
            match endpoint {
                Endpoint::Tcp(addr) => {
                    let stream = TcpStream::connect(addr)?;
                    stream.set_nodelay(true)?;
                    let read = stream.try_clone()?;
                    (Box::new(BufWriter::new(stream)), Box::new(read), None)
                }
                #[cfg(unix)]
                Endpoint::Unix(path) => {
                    let stream = std::os::unix::net::UnixStream::connect(path)?;
                    let read = stream.try_clone()?;
                    (Box::new(BufWriter::new(stream)), Box::new(read), None)
                }
                Endpoint::Exec(cmd) => {
                    let mut child = shell(cmd)
                        .stdin(Stdio::piped())
                        .stdout(Stdio::piped())
                        .stderr(Stdio::inherit())
                        .spawn()?;
                    let stdin = child.stdin.take().expect("piped stdin");
                    let stdout = child.stdout.take().expect("piped stdout");
                    (Box::new(BufWriter::new(stdin)), Box::new(stdout), Some(child))
                }
            };
        let (tx, rx) = mpsc::channel();
        thread::Builder::new()
            .name("denoiser-reader".into())
            .spawn(move || {
                let mut reader = BufReader::new(reader);
                loop {
                    let frame = read_frame(&mut reader);
                    let stop = frame.is_err();
                    if tx.send(frame).is_err() || stop {
                        break;
                    }
                }
            })?;
        debug!("connected to denoiser at {name}");
        Ok(ExternalDenoiser {
            endpoint: name,
            writer,
            responses: rx,
            child,
            timeout,
            broken: false,
            declared_fne: true,
            bytes_sent: 0,
            bytes_received: 0,
        })
    }

    /// Overrides whether this peer claims firm nonexpansiveness (default yes).
    pub fn with_declared_fne(mut self, declared: bool) -> Self {
        self.declared_fne = declared;
        self
    }

    pub fn timeout(&self) -> Duration {
        self.timeout
    }

    /// Total framed bytes written and read so far.
    pub fn traffic(&self) -> (usize, usize) {
        (self.bytes_sent, self.bytes_received)
    }

    /// Sends one f32 request and waits for its response.
    pub fn request(&mut self, x: &ImageBuffer<f32>) -> Result<ImageBuffer<f32>> {
        if self.broken {
            return Err(Error::Protocol(format!(
                "connection to {} is unusable after an earlier failure",
                self.endpoint
            )));
        }
        let result = self.exchange(x);
        if matches!(
            result,
            Err(Error::Protocol(_) | Error::Timeout(_) | Error::PeerClosed | Error::Io(_))
        ) {
            self.broken = true;
        }
        result
    }

    fn exchange(&mut self, x: &ImageBuffer<f32>) -> Result<ImageBuffer<f32>> {
        let frame = Frame::Denoise(x.clone());
        write_frame(&mut self.writer, &frame).map_err(|e| match e {
            Error::Io(io) if io.kind() == std::io::ErrorKind::BrokenPipe => Error::PeerClosed,
            other => other,
        })?;
        self.bytes_sent += frame.encoded_len();
        let reply = match self.responses.recv_timeout(self.timeout) {
            Ok(reply) => reply?,
            Err(RecvTimeoutError::Timeout) => {
                return Err(Error::Timeout(self.timeout.as_secs_f64()))
            }
            Err(RecvTimeoutError::Disconnected) => return Err(Error::PeerClosed),
        };
        self.bytes_received += reply.encoded_len();
        match reply {
            Frame::Ok(y) => {
                y.ensure_shape(x.shape())?;
                Ok(y)
            }
            Frame::Error { message, .. } => Err(Error::PeerError(message)),
            Frame::Denoise(_) => Err(Error::Protocol("peer sent a request frame".into())),
        }
    }

    /// Sends a 1x1x1 frame and checks the reply is well formed.
    pub fn health_check(&mut self) -> Result<()> {
        let probe = ImageBuffer::<f32>::filled(Shape::new(1, 1, 1), 0.5);
        self.request(&probe).map(|_| ())
    }
}

fn shell(cmd: &str) -> Command {
    if cfg!(windows) {
        let mut c = Command::new("cmd");
        c.arg("/C").arg(cmd);
        c
    } else {
        let mut c = Command::new("sh");
        c.arg("-c").arg(cmd);
        c
    }
}

impl Drop for ExternalDenoiser {
    fn drop(&mut self) {
        if let Some(mut child) = self.child.take() {
            // closing stdin lets a well-behaved server exit on its own
            self.writer = Box::new(std::io::sink());
            thread::sleep(Duration::from_millis(10));
            if let Ok(None) = child.try_wait() {
                let _ = child.kill();
            }
            let _ = child.wait();
        }
    }
}

impl<T: Scalar> Denoiser<T> for ExternalDenoiser {
    fn denoise(&mut self, x: &ImageBuffer<T>) -> Result<ImageBuffer<T>> {
        Ok(self.request(&x.cast::<f32>())?.cast::<T>())
    }
    fn descriptor(&self) -> String {
        format!("external({})", self.endpoint)
    }
    fn declared_fne(&self) -> bool {
        self.declared_fne
    }
}

/// Serializable denoiser choice, as used in configuration files.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DenoiserSpec {
    Identity,
    DctSoftThreshold { threshold: f64 },
    Scaled { factor: f64 },
    External { endpoint: String },
}

impl DenoiserSpec {
    pub fn build<T: Scalar>(&self) -> Result<Box<dyn Denoiser<T>>> {
        Ok(match self {
            DenoiserSpec::Identity => Box::new(IdentityDenoiser),
            DenoiserSpec::DctSoftThreshold { threshold } => {
                Box::new(DctSoftThreshold::new(T::lit(*threshold))?)
            }
            DenoiserSpec::Scaled { factor } => Box::new(ScaledDenoiser::new(T::lit(*factor))),
            DenoiserSpec::External { endpoint } => Box::new(ExternalDenoiser::connect(
                &Endpoint::parse(endpoint)?,
                timeout_from_env(),
            )?),
        })
    }
}

/// How `check_fne` draws its pairs.
#[derive(Debug, Clone)]
pub struct FneSampling<T> {
    pub shape: Shape,
    /// Uniform pairs are drawn from `[lo, hi]^K`.
    pub lo: f64,
    pub hi: f64,
    /// Iterates to sample near; when non-empty, half of the pairs come from
    /// here (two iterates, or an iterate and a small perturbation of it).
    pub trajectory: Vec<ImageBuffer<T>>,
    /// Standard deviation of the perturbation for trajectory pairs.
    pub perturbation: f64,
}

impl<T: Scalar> FneSampling<T> {
    pub fn uniform(shape: Shape, lo: f64, hi: f64) -> Self {
        FneSampling {
            shape,
            lo,
            hi,
            trajectory: Vec::new(),
            perturbation: 1e-2,
        }
    }

    /// `[-0.5, 1.5]^K`, the default test domain.
    pub fn default_for(shape: Shape) -> Self {
        Self::uniform(shape, -0.5, 1.5)
    }

    pub fn with_trajectory(mut self, trajectory: Vec<ImageBuffer<T>>) -> Self {
        self.trajectory = trajectory;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Uniform,
    Trajectory,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairRatio {
    pub index: usize,
    pub kind: PairKind,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FneReport {
    pub pairs: usize,
    pub skipped: usize,
    pub max_ratio: f64,
    pub violations: usize,
    pub slack: f64,
    /// Largest ratios, descending.
    pub worst: Vec<PairRatio>,
}

impl FneReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_ratio <= 1.0 + tol
    }
}

pub const FNE_SLACK: f64 = 1e-6;
const WORST_KEPT: usize = 5;

/// Samples pairs and reports the largest `|Qx - Qy| / |x - y|`, `Q = 2J - Id`.
/// Pairs with `x == y` are skipped.
pub fn check_fne<T: Scalar>(
    j: &mut dyn Denoiser<T>,
    rng: &mut Rng,
    pairs: usize,
    sampling: &FneSampling<T>,
) -> Result<FneReport> {
    if pairs == 0 {
        return Err(Error::invalid("check_fne needs at least one pair"));
    }
    if !(sampling.lo < sampling.hi) {
        return Err(Error::invalid("sampling domain needs lo < hi"));
    }
    for u in &sampling.trajectory {
        u.ensure_shape(sampling.shape)?;
    }
    let mut ratios = Vec::with_capacity(pairs);
    let mut skipped = 0;
    for index in 0..pairs {
        let from_trajectory = !sampling.trajectory.is_empty() && index % 2 == 1;
        let (x, y, kind) = if from_trajectory {
            let n = sampling.trajectory.len();
            let x = sampling.trajectory[(rng.next_u64() % n as u64) as usize].clone();
            let y = if n > 1 && rng.uniform() < 0.5 {
                sampling.trajectory[(rng.next_u64() % n as u64) as usize].clone()
            } else {
                let noise = rng.normal_image::<T>(sampling.shape);
                crate::tensor::axpy(T::lit(sampling.perturbation), &noise, &x)?
            };
            (x, y, PairKind::Trajectory)
        } else {
            let x = rng.uniform_image::<T>(sampling.shape, sampling.lo, sampling.hi);
            let y = rng.uniform_image::<T>(sampling.shape, sampling.lo, sampling.hi);
            (x, y, PairKind::Uniform)
        };
        let d = x.distance(&y)?.as_f64();
        if d == 0.0 {
            skipped += 1;
            continue;
        }
        let jx = j.denoise(&x)?;
        let jy = j.denoise(&y)?;
        jx.ensure_shape(sampling.shape)?;
        jy.ensure_shape(sampling.shape)?;
        let two = T::two();
        let qx = jx.zip_map(&x, |a, b| two * a - b)?;
        let qy = jy.zip_map(&y, |a, b| two * a - b)?;
        let ratio = qx.distance(&qy)?.as_f64() / d;
        ratios.push(PairRatio { index, kind, ratio });
    }
    let violations = ratios.iter().filter(|p| p.ratio > 1.0 + FNE_SLACK).count();
    ratios.sort_by(|a, b| b.ratio.total_cmp(&a.ratio));
    let max_ratio = ratios.first().map_or(0.0, |p| p.ratio);
    ratios.truncate(WORST_KEPT);
    Ok(FneReport {
        pairs: pairs - skipped,
        skipped,
        max_ratio,
        violations,
        slack: FNE_SLACK,
        worst: ratios,
    })
}
