//! PaQL parsing, CSV ingestion and the `pq` command set.

pub mod commands;
pub mod ingest;
pub mod paql;

pub use commands::{exit_code, main_with_args, Cli, RunConfig, SolveReport};
pub use ingest::{ingest_csv, load_query, load_relation, parse_query, read_cache, write_cache, IngestError, QueryError};
pub use paql::{parse_paql, ParseError, Paql};
