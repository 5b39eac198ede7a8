//! A local stand-in for the imagery API: a deterministic world of sequences
//! on a tile grid, served over HTTP with a few scripted failures.

#![allow(dead_code)]

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex};
use std::thread::JoinHandle;

use serde_json::{json, Value};
use surface_forge::geo::{tile_bbox, TileId};

pub const TOKEN: &str = "fixture-token";
pub const FORBIDDEN_SEQUENCE: &str = "s-forbidden";

/// Sequence ids per tile, and images per sequence.
pub struct World {
    pub zoom: u8,
    pub tiles: Vec<TileId>,
    pub tile_sequences: BTreeMap<TileId, Vec<String>>,
    pub images: BTreeMap<String, Vec<Value>>,
}

impl World {
    /// `nx` by `ny` tiles starting at (`x0`, `y0`).
    pub fn new(zoom: u8, x0: u32, y0: u32, nx: u32, ny: u32) -> Self {
        let mut tiles = Vec::new();
        let mut tile_sequences = BTreeMap::new();
        let mut images = BTreeMap::new();
        for x in x0..x0 + nx {
            for y in y0..y0 + ny {
                let t = TileId::new(zoom, x, y).unwrap();
                tiles.push(t);
                let b = tile_bbox(t);
                let mut ids = Vec::new();
                for k in 0..(x * 7 + y * 3) % 3 {
                    let id = format!("s-{x}-{y}-{k}");
                    let n = 2 + (x + y + k) % 4;
                    let imgs: Vec<Value> = (0..n)
                        .map(|i| {
                            let f = (i as f64 + 1.0) / (n as f64 + 1.0);
                            let lon = b.min_lon + f * (b.max_lon - b.min_lon);
                            let lat = b.min_lat + (0.2 + 0.2 * k as f64) * (b.max_lat - b.min_lat);
                            json!({
                                "id": format!("{}{:02}", 10_000 + 100 * x + y, 10 * k + i),
                                "sequence": id,
                                "thumb_original_url": format!("https://img.example/{id}/{i}.jpg"),
                                "computed_geometry": {"type": "Point", "coordinates": [lon, lat]},
                                "height": 3000,
                                "width": 4000,
                                "computed_altitude": 100.0 + i as f64,
                                "make": "",
                                "model": "cam",
                                "creator": {"username": format!("u{}", k), "id": "1"},
                                "is_pano": i % 2 == 0,
                                "captured_at": 1_600_000_000_000u64 + 1000 * i as u64,
                            })
                        })
                        .collect();
                    images.insert(id.clone(), imgs);
                    ids.push(id);
                }
                // the left neighbour's first sequence runs into every even column
                if x % 2 == 0 && x > x0 && ((x - 1) * 7 + y * 3) % 3 > 0 {
                    ids.push(format!("s-{}-{y}-0", x - 1));
                }
                if x == x0 && y == y0 {
                    ids.push(FORBIDDEN_SEQUENCE.into());
                    images.insert(FORBIDDEN_SEQUENCE.into(), Vec::new());
                }
                tile_sequences.insert(t, ids);
            }
        }
        Self { zoom, tiles, tile_sequences, images }
    }

    pub fn tile_body(&self, t: TileId) -> String {
        let b = tile_bbox(t);
        let features: Vec<Value> = self.tile_sequences.get(&t).into_iter().flatten().map(|id| {
            json!({
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": [[b.min_lon + 0.01, b.min_lat + 0.01], [b.max_lon - 0.01, b.max_lat - 0.01]]},
                "properties": {"id": id},
            })
        }).collect();
        json!({"type": "FeatureCollection", "features": features}).to_string()
    }

    pub fn sequence_count(&self) -> usize {
        self.images.len()
    }

    /// Region strictly inside the world's tiles.
    pub fn region(&self) -> [f64; 4] {
        let first = tile_bbox(*self.tiles.first().unwrap());
        let last = tile_bbox(*self.tiles.last().unwrap());
        let (min_lon, max_lon) = (first.min_lon.min(last.min_lon), first.max_lon.max(last.max_lon));
        let (min_lat, max_lat) = (first.min_lat.min(last.min_lat), first.max_lat.max(last.max_lat));
        let e = 1e-6;
        [min_lon + e, min_lat + e, max_lon - e, max_lat - e]
    }
}

#[derive(Default)]
pub struct Hits {
    /// Path (without query) or `sequence:<id>` to request count.
    pub by_key: BTreeMap<String, usize>,
}

pub struct FixtureServer {
    pub base: String,
    pub hits: Arc<Mutex<Hits>>,
    server: Arc<tiny_http::Server>,
    handle: Option<JoinHandle<()>>,
}

impl FixtureServer {
    /// Serves `world`. The first request for the world's second tile gets a
    /// 500, the first image request gets a 429, and the forbidden sequence
    /// always gets a 403.
    pub fn start(world: Arc<World>) -> Self {
        let server = Arc::new(tiny_http::Server::http("127.0.0.1:0").unwrap());
        let base = format!("http://{}", server.server_addr().to_ip().unwrap());
        let hits = Arc::new(Mutex::new(Hits::default()));
        let (srv, h) = (server.clone(), hits.clone());
        let flaky_tile = world.tiles.get(1).map(|t| format!("/tiles/{}/{}/{}", t.z, t.x, t.y));
        let handle = std::thread::spawn(move || {
            for req in srv.incoming_requests() {
                let url = req.url().to_string();
                let (path, query) = url.split_once('?').unwrap_or((&url, ""));
                let authorized = req
                    .headers()
                    .iter()
                    .any(|hd| hd.field.equiv("Authorization") && hd.value.as_str() == format!("Bearer {TOKEN}"));
                let (status, body) = if !authorized {
                    (401, "{\"error\":\"unauthorized\"}".to_string())
                } else if let Some(rest) = path.strip_prefix("/tiles/") {
                    let n = bump(&h, path);
                    let parts: Vec<u32> = rest.split('/').filter_map(|p| p.parse().ok()).collect();
                    let tile = match parts.as_slice() {
                        [z, x, y] => TileId::new(*z as u8, *x, *y).ok(),
                        _ => None,
                    };
                    match tile {
                        Some(_) if flaky_tile.as_deref() == Some(path) && n == 1 => (500, "oops".into()),
                        Some(t) => (200, world.tile_body(t)),
                        None => (404, String::new()),
                    }
                } else if path == "/images" {
                    let n_total = bump(&h, "/images");
                    let seq = query
                        .split('&')
                        .find_map(|kv| kv.strip_prefix("sequence_ids="))
                        .unwrap_or("")
                        .to_string();
                    bump(&h, &format!("sequence:{seq}"));
                    if n_total == 1 {
                        (429, "slow down".into())
                    } else if seq == FORBIDDEN_SEQUENCE {
                        (403, "{\"error\":\"forbidden\"}".into())
                    } else {
                        match world.images.get(&seq) {
                            Some(imgs) => (200, json!({"data": imgs}).to_string()),
                            None => (404, String::new()),
                        }
                    }
                } else {
                    (404, String::new())
                };
                let _ = req.respond(tiny_http::Response::from_string(body).with_status_code(status));
            }
        });
        Self { base, hits, server, handle: Some(handle) }
    }

    pub fn tiles_url(&self) -> String {
        format!("{}/tiles/{{z}}/{{x}}/{{y}}", self.base)
    }

    pub fn images_url(&self) -> String {
        format!("{}/images", self.base)
    }

    pub fn hits(&self, key: &str) -> usize {
        self.hits.lock().unwrap().by_key.get(key).copied().unwrap_or(0)
    }

    pub fn tile_hits(&self) -> usize {
        self.hits.lock().unwrap().by_key.iter().filter(|(k, _)| k.starts_with("/tiles/")).map(|(_, v)| v).sum()
    }
}

fn bump(h: &Arc<Mutex<Hits>>, key: &str) -> usize {
    let mut g = h.lock().unwrap();
    let e = g.by_key.entry(key.to_string()).or_default();
    *e += 1;
    *e
}

impl Drop for FixtureServer {
    fn drop(&mut self) {
        self.server.unblock();
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}
