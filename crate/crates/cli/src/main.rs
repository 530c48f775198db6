//! `meshnote`: headless driver for mesh inspection, selection, detectors and
//! annotation stores.

mod commands;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "meshnote", version, about = "Surface annotation tools for triangle meshes")]
pub struct Cli {
    /// Store directory for model and annotation commands.
    #[arg(long, global = true, env = "MESHNOTE_STORE", default_value = "meshnote-store")]
    pub store: PathBuf,

    /// Machine-readable output.
    #[arg(long, global = true)]
    pub json: bool,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Summarize a mesh file.
    Info { mesh: PathBuf },

    /// Select faces of a mesh file with a gesture file.
    Select { mesh: PathBuf, gesture: PathBuf },

    /// Run a detector on a mesh file and print the heat map.
    Detect {
        mesh: PathBuf,
        /// Detector name, e.g. `saliency` or `builtin:defect`.
        detector: String,
        /// Also report the faces whose mean vertex value reaches this level.
        #[arg(long)]
        threshold: Option<f64>,
        /// JSON array of remote detector descriptors.
        #[arg(long, env = "MESHNOTE_DETECTORS")]
        detectors: Option<PathBuf>,
        /// Remote detector timeout in seconds.
        #[arg(long, default_value_t = 120.0)]
        detector_timeout: f64,
    },

    /// Add a mesh file to the store.
    Upload {
        mesh: PathBuf,
        /// Display name; defaults to the file name.
        #[arg(long)]
        name: Option<String>,
    },

    /// List stored models.
    Models,

    /// Create an annotation on a stored model.
    Annotate {
        model: String,
        /// Face indices, comma separated.
        #[arg(long, value_delimiter = ',', required_unless_present = "input")]
        faces: Vec<u32>,
        #[arg(long, default_value = "")]
        title: String,
        /// `#rrggbb` color.
        #[arg(long, default_value = "#ff0000")]
        color: String,
        #[arg(long, default_value = "")]
        description: String,
        #[arg(long, default_value = "")]
        creator: String,
        /// Field schema as `name` or `name@version`.
        #[arg(long)]
        schema: Option<String>,
        /// Schema field value as `key=value`; repeatable.
        #[arg(long = "field", value_name = "KEY=VALUE")]
        fields: Vec<String>,
        /// Read the whole annotation from a JSON file instead.
        #[arg(long, conflicts_with_all = ["faces", "title", "color", "description", "creator", "schema", "fields"])]
        input: Option<PathBuf>,
    },

    /// Delete an annotation.
    Delete { model: String, annotation: String },

    /// Import annotations from a JSON-LD file.
    Import {
        model: String,
        file: PathBuf,
        /// Replace annotations whose ids already exist.
        #[arg(long)]
        overwrite: bool,
    },

    /// Export a model's annotations as JSON-LD.
    Export {
        model: String,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },

    /// Render the printable HTML report of a model.
    Report {
        model: String,
        /// Generation time to print, RFC 3339; defaults to now.
        #[arg(long)]
        timestamp: Option<String>,
        #[arg(long, short)]
        output: Option<PathBuf>,
    },

    /// Register a field schema from a JSON file.
    RegisterSchema { file: PathBuf },

    /// Register a remote detector endpoint.
    RegisterDetector { name: String, endpoint: String },

    /// Serve the HTTP API.
    Serve {
        #[arg(long, env = "MESHNOTE_LISTEN", default_value = "127.0.0.1:8080")]
        listen: SocketAddr,
        #[arg(long, env = "MESHNOTE_DETECTORS")]
        detectors: Option<PathBuf>,
        #[arg(long, default_value_t = 120.0)]
        detector_timeout: f64,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("meshnote: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
