//! Paper metadata lookup: fixture directory or remote endpoint, same JSON
//! shape either way (`{paperId, title, venue, authors: [{authorId, name}]}`).

use std::collections::BTreeSet;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Author {
    pub author_id: String,
    pub name: String,
}

/// Metadata of one paper. Author ids are unique within a paper.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PaperMeta {
    pub paper_id: String,
    pub title: String,
    pub venue: String,
    pub authors: Vec<Author>,
}

#[derive(Debug, Error)]
pub enum MetadataError {
    #[error("paper {paper_id}: fixture {path} not readable: {source}")]
    MissingFixture {
        paper_id: String,
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("paper {paper_id}: malformed metadata: {message}")]
    Malformed { paper_id: String, message: String },
    #[error("paper {paper_id}: duplicate author id {author_id}")]
    DuplicateAuthor { paper_id: String, author_id: String },
    #[error("paper {paper_id}: request to {url} failed: {message}")]
    Http { paper_id: String, url: String, message: String },
}

/// Where metadata comes from: a directory of `<paper_id>.json` fixtures or a
/// GET endpoint with `{paper_id}` substituted into the URL template.
#[derive(Debug, Clone)]
pub enum MetadataSource {
    FixtureDir(PathBuf),
    Remote { url_template: String },
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct WireAuthor {
    author_id: String,
    name: String,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase")]
struct WirePaper {
    paper_id: String,
    title: String,
    venue: String,
    authors: Vec<WireAuthor>,
}

pub fn fetch_paper_metadata(
    paper_id: &str,
    source: &MetadataSource,
) -> Result<PaperMeta, MetadataError> {
    let body = match source {
        MetadataSource::FixtureDir(dir) => {
            let path = dir.join(format!("{paper_id}.json"));
            std::fs::read_to_string(&path).map_err(|source| MetadataError::MissingFixture {
                paper_id: paper_id.to_string(),
                path,
                source,
            })?
        }
        MetadataSource::Remote { url_template } => {
            let url = url_template.replace("{paper_id}", paper_id);
            let response = ureq::get(&url).call().map_err(|e| MetadataError::Http {
                paper_id: paper_id.to_string(),
                url: url.clone(),
                message: e.to_string(),
            })?;
            response.into_string().map_err(|e| MetadataError::Http {
                paper_id: paper_id.to_string(),
                url,
                message: e.to_string(),
            })?
        }
    };
    parse_metadata(paper_id, &body)
}

fn parse_metadata(paper_id: &str, body: &str) -> Result<PaperMeta, MetadataError> {
    let wire: WirePaper = serde_json::from_str(body).map_err(|e| MetadataError::Malformed {
        paper_id: paper_id.to_string(),
        message: e.to_string(),
    })?;
    let mut seen: BTreeSet<&str> = BTreeSet::new();
    for author in &wire.authors {
        if !seen.insert(&author.author_id) {
            return Err(MetadataError::DuplicateAuthor {
                paper_id: paper_id.to_string(),
                author_id: author.author_id.clone(),
            });
        }
    }
    Ok(PaperMeta {
        paper_id: wire.paper_id,
        title: wire.title,
        venue: wire.venue,
        authors: wire
            .authors
            .into_iter()
            .map(|a| Author { author_id: a.author_id, name: a.name })
            .collect(),
    })
}
