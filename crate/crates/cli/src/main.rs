//! Command line front end for the inter-predictive point cloud color codec.
//!
//! Frames are PLY files in a directory, ordered by file name. `encode`
//! compresses their colors into a single bitstream, `decode` restores
//! colored frames given the same geometry, and `rd-sweep` encodes at
//! several quantization steps and reports rate/distortion figures.

use std::fmt;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write as _};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use pcac_core::codec::{decode_sequence, encode_sequence, CodecConfig, CodecError};
use pcac_core::container::{read_stream, write_stream, ContainerError};
use pcac_core::frame::{FrameError, FrameSequence, PointCloudFrame};
use pcac_core::metrics::{compute_bpv, compute_psnr_y, format_rd_csv, rd_sweep, MetricsError};
use pcac_core::motion::{MeConfig, MeMode};
use pcac_core::overhead::OverheadCodec;
use pcac_core::ply::{load_ply, load_ply_geometry, save_ply, PlyError};
use pcac_core::transform::BASIS_BUILD_TAG;

#[derive(Parser)]
#[command(
    name = "pcac",
    version,
    about = "Inter-predictive compression of point cloud colors"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Compress the colors of a PLY frame directory into a bitstream.
    Encode(EncodeArgs),
    /// Reconstruct colored PLY frames from a bitstream plus the geometry.
    Decode(DecodeArgs),
    /// Encode at several quantization steps and tabulate rate/distortion.
    RdSweep(RdSweepArgs),
}

#[derive(Args)]
struct CodingArgs {
    /// Frames per group; each group starts with a predictionless frame.
    #[arg(long, default_value_t = 8)]
    gof: usize,
    /// Cubic coding block side in voxels.
    #[arg(long, default_value_t = 16)]
    block_size: u32,
    /// Geometry weight (0..=1) in the blended point-matching cost.
    #[arg(long, default_value_t = 0.1)]
    alpha: f64,
    /// Motion refinement radius in voxels.
    #[arg(long, default_value_t = 1)]
    beta: u32,
    /// Side of the cubic motion search region, odd.
    #[arg(long, default_value_t = 61)]
    region: u32,
    /// Largest per-block smoothing filter count.
    #[arg(long, default_value_t = 5)]
    kmax: u8,
    /// Motion estimation mode.
    #[arg(long, value_enum, default_value_t = MeModeArg::Full)]
    me: MeModeArg,
    /// Compressor for the motion and filter side streams.
    #[arg(long, value_enum, default_value_t = OverheadArg::Lz)]
    overhead_codec: OverheadArg,
}

#[derive(Args)]
struct EncodeArgs {
    /// Directory of input .ply frames (name order = time order).
    #[arg(long)]
    input: PathBuf,
    /// Bitstream file to write.
    #[arg(long)]
    output: PathBuf,
    /// Uniform quantization step for transform coefficients.
    #[arg(long)]
    qstep: f64,
    #[command(flatten)]
    coding: CodingArgs,
}

#[derive(Args)]
struct DecodeArgs {
    /// Bitstream file written by `encode`.
    #[arg(long)]
    bitstream: PathBuf,
    /// Directory holding the same frames' geometry as .ply files.
    #[arg(long)]
    geometry: PathBuf,
    /// Directory to write reconstructed .ply frames into.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct RdSweepArgs {
    /// Directory of input .ply frames (name order = time order).
    #[arg(long)]
    input: PathBuf,
    /// Quantization steps to encode at, comma separated.
    #[arg(long, value_delimiter = ',', default_values_t = [8.0, 16.0, 32.0, 64.0])]
    qsteps: Vec<f64>,
    /// CSV output file; omitted, the table goes to stdout.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    coding: CodingArgs,
}

#[derive(Clone, Copy, ValueEnum)]
enum MeModeArg {
    /// Iterative registration plus local refinement per block.
    Full,
    /// Transmit zero motion everywhere; prediction only.
    Zmv,
}

#[derive(Clone, Copy, ValueEnum)]
enum OverheadArg {
    /// Store side streams uncompressed.
    Store,
    /// Compress side streams with LZMA.
    Lz,
}

#[derive(Debug)]
enum CliError {
    Input(String),
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    Ply {
        path: PathBuf,
        source: PlyError,
    },
    Frames(FrameError),
    Codec(CodecError),
    Bitstream(ContainerError),
    Metrics(MetricsError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Input(msg) => write!(f, "input: {msg}"),
            CliError::Io { path, source } => write!(f, "i/o: {}: {source}", path.display()),
            CliError::Ply { path, source } => write!(f, "ply: {}: {source}", path.display()),
            CliError::Frames(e) => write!(f, "frames: {e}"),
            CliError::Codec(e) => write!(f, "codec: {e}"),
            CliError::Bitstream(e) => write!(f, "bitstream: {e}"),
            CliError::Metrics(e) => write!(f, "metrics: {e}"),
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("pcac: error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Encode(args) => cmd_encode(args),
        Command::Decode(args) => cmd_decode(args),
        Command::RdSweep(args) => cmd_rd_sweep(args),
    }
}

fn cmd_encode(args: EncodeArgs) -> Result<(), CliError> {
    let frames = load_frames(&args.input, load_ply)?;
    let seq = FrameSequence::new(frames, args.coding.gof).map_err(CliError::Frames)?;
    let cfg = codec_config(&args.coding, args.qstep);
    let out = encode_sequence(&seq, &cfg).map_err(CliError::Codec)?;

    let file = File::create(&args.output).map_err(|e| io_err(&args.output, e))?;
    let mut sink = BufWriter::new(file);
    write_stream(&mut sink, &out.header, &out.frames).map_err(CliError::Bitstream)?;
    sink.flush().map_err(|e| io_err(&args.output, e))?;

    let voxels: usize = out.stats.iter().map(|s| s.point_count).sum();
    let psnr = compute_psnr_y(seq.frames(), &out.reconstruction).map_err(CliError::Metrics)?;
    println!(
        "encoded {} frames ({voxels} voxels) to {}: {:.4} bits/voxel, {:.2} dB PSNR-Y",
        seq.len(),
        args.output.display(),
        compute_bpv(&out.stats),
        psnr
    );
    Ok(())
}

fn cmd_decode(args: DecodeArgs) -> Result<(), CliError> {
    let file = File::open(&args.bitstream).map_err(|e| io_err(&args.bitstream, e))?;
    let (header, records) = read_stream(&mut BufReader::new(file)).map_err(CliError::Bitstream)?;
    if header.basis_build_tag != BASIS_BUILD_TAG {
        eprintln!(
            "pcac: warning: stream comes from a different transform-basis build \
             (tag {:#010x}, this build {:#010x}); reconstruction may not be bit-exact",
            header.basis_build_tag, BASIS_BUILD_TAG
        );
    }

    let geometry = load_frames(&args.geometry, load_ply_geometry)?;
    let decoded = decode_sequence(&header, &records, &geometry).map_err(CliError::Codec)?;

    fs::create_dir_all(&args.output).map_err(|e| io_err(&args.output, e))?;
    for frame in &decoded {
        let path = args
            .output
            .join(format!("frame_{:04}.ply", frame.frame_index()));
        save_ply(&path, frame).map_err(|e| CliError::Ply { path, source: e })?;
    }
    println!(
        "decoded {} frames into {}",
        decoded.len(),
        args.output.display()
    );
    Ok(())
}

fn cmd_rd_sweep(args: RdSweepArgs) -> Result<(), CliError> {
    let frames = load_frames(&args.input, load_ply)?;
    let seq = FrameSequence::new(frames, args.coding.gof).map_err(CliError::Frames)?;
    let base = codec_config(&args.coding, 8.0);
    let rows = rd_sweep(&seq, &base, &args.qsteps).map_err(CliError::Codec)?;
    let csv = format_rd_csv(&rows);
    match &args.csv {
        Some(path) => {
            fs::write(path, csv).map_err(|e| io_err(path, e))?;
            println!(
                "wrote {} operating points to {}",
                rows.len(),
                path.display()
            );
        }
        None => print!("{csv}"),
    }
    Ok(())
}

fn codec_config(c: &CodingArgs, qstep: f64) -> CodecConfig {
    CodecConfig {
        block_size: c.block_size,
        qstep,
        kmax: c.kmax,
        me: MeConfig {
            alpha: c.alpha,
            beta: c.beta,
            region_side: c.region,
            mode: match c.me {
                MeModeArg::Full => MeMode::Full,
                MeModeArg::Zmv => MeMode::ZeroMotion,
            },
            ..MeConfig::default()
        },
        overhead_codec: match c.overhead_codec {
            OverheadArg::Store => OverheadCodec::Store,
            OverheadArg::Lz => OverheadCodec::Lzma,
        },
    }
}

fn io_err(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Loads every `.ply` file in `dir`, sorted by file name, assigning frame
/// indices in that order.
fn load_frames(
    dir: &Path,
    load: fn(&Path, usize) -> Result<PointCloudFrame, PlyError>,
) -> Result<Vec<PointCloudFrame>, CliError> {
    let entries = fs::read_dir(dir).map_err(|e| io_err(dir, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| io_err(dir, e))?.path();
        if path
            .extension()
            .is_some_and(|x| x.eq_ignore_ascii_case("ply"))
        {
            paths.push(path);
        }
    }
    paths.sort();
    if paths.is_empty() {
        return Err(CliError::Input(format!(
            "no .ply frames found in {}",
            dir.display()
        )));
    }
    paths
        .iter()
        .enumerate()
        .map(|(t, p)| {
            load(p, t).map_err(|e| CliError::Ply {
                path: p.clone(),
                source: e,
            })
        })
        .collect()
}
