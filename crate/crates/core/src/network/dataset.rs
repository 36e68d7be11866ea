//! City/ping dataset ingestion.
//!
//! Three CSV files describe a real-world deployment:
//!
//! * `cities.csv`: `city,lat,lon` in decimal degrees;
//! * `pings.csv`: a header row `city,<name>,<name>,...` followed by one row
//!   per city holding one-way latencies in milliseconds (self entry 0);
//! * `node_cities.csv`: `city,count`, the number of nodes each city hosts.
//!
//! Cities without a ping row borrow the row of the geographically closest
//! covered city.

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::topology::SAME_CITY_LATENCY_MS;

const EARTH_RADIUS_KM: f64 = 6371.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct City {
    pub name: String,
    pub lat: f64,
    pub lon: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CityDataset {
    cities: Vec<City>,
    /// For every city, the ping row it uses (its own or the nearest covered one).
    ping_row: Vec<usize>,
    covered: Vec<bool>,
    rows: usize,
    ping: Vec<f64>,
    node_cities: Vec<(usize, u32)>,
}

pub fn great_circle_km(a: &City, b: &City) -> f64 {
    let (la1, lo1) = (a.lat.to_radians(), a.lon.to_radians());
    let (la2, lo2) = (b.lat.to_radians(), b.lon.to_radians());
    let h = ((la2 - la1) / 2.0).sin().powi(2)
        + la1.cos() * la2.cos() * ((lo2 - lo1) / 2.0).sin().powi(2);
    2.0 * EARTH_RADIUS_KM * h.sqrt().min(1.0).asin()
}

fn reader(text: &str) -> csv::Reader<&[u8]> {
    csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(text.as_bytes())
}

fn parse_f64(label: &str, what: &str, raw: &str) -> Result<f64> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| Error::dataset(label, format!("{what}: not a number: {raw:?}")))
}

impl CityDataset {
    pub fn load(cities: &Path, pings: &Path, node_cities: &Path) -> Result<Self> {
        let read = |p: &Path| std::fs::read_to_string(p).map_err(|e| Error::io(p, e));
        Self::parse(
            (&cities.display().to_string(), &read(cities)?),
            (&pings.display().to_string(), &read(pings)?),
            (&node_cities.display().to_string(), &read(node_cities)?),
        )
    }

    /// The small in-repo fixture used by tests and the scenario catalog.
    pub fn builtin() -> Self {
        Self::parse(
            (
                "fixture/cities.csv",
                include_str!("../../data/fixture/cities.csv"),
            ),
            (
                "fixture/pings.csv",
                include_str!("../../data/fixture/pings.csv"),
            ),
            (
                "fixture/node_cities.csv",
                include_str!("../../data/fixture/node_cities.csv"),
            ),
        )
        .expect("bundled fixture is valid")
    }

    /// Parses `(label, contents)` pairs; labels only appear in errors.
    pub fn parse(
        cities_csv: (&str, &str),
        pings_csv: (&str, &str),
        node_cities_csv: (&str, &str),
    ) -> Result<Self> {
        let cities = parse_cities(cities_csv.0, cities_csv.1)?;
        let by_name: HashMap<&str, usize> = cities
            .iter()
            .enumerate()
            .map(|(i, c)| (c.name.as_str(), i))
            .collect();

        let (row_cities, ping) = parse_pings(pings_csv.0, pings_csv.1, &by_name)?;
        let rows = row_cities.len();
        let mut covered = vec![false; cities.len()];
        let mut own_row = vec![None; cities.len()];
        for (r, &c) in row_cities.iter().enumerate() {
            covered[c] = true;
            own_row[c] = Some(r);
        }
        let ping_row = (0..cities.len())
            .map(|c| {
                own_row[c].unwrap_or_else(|| {
                    let mut best = (f64::INFINITY, 0);
                    for (r, &rc) in row_cities.iter().enumerate() {
                        let d = great_circle_km(&cities[c], &cities[rc]);
                        if d < best.0 {
                            best = (d, r);
                        }
                    }
                    best.1
                })
            })
            .collect();

        let mut node_cities = Vec::new();
        let mut rdr = reader(node_cities_csv.1);
        check_header(node_cities_csv.0, &mut rdr, &["city", "count"])?;
        for rec in rdr.records() {
            let rec = rec.map_err(|e| Error::dataset(node_cities_csv.0, e.to_string()))?;
            let name = rec.get(0).unwrap_or_default();
            let city = *by_name.get(name).ok_or_else(|| {
                Error::dataset(
                    node_cities_csv.0,
                    format!("unknown city without coordinates: {name}"),
                )
            })?;
            let count: u32 = rec.get(1).unwrap_or_default().parse().map_err(|_| {
                Error::dataset(node_cities_csv.0, format!("bad node count for {name}"))
            })?;
            node_cities.push((city, count));
        }

        Ok(CityDataset {
            cities,
            ping_row,
            covered,
            rows,
            ping,
            node_cities,
        })
    }

    pub fn cities(&self) -> &[City] {
        &self.cities
    }

    pub fn city_index(&self, name: &str) -> Option<usize> {
        self.cities.iter().position(|c| c.name == name)
    }

    pub fn is_covered(&self, city: usize) -> bool {
        self.covered[city]
    }

    pub fn node_cities(&self) -> &[(usize, u32)] {
        &self.node_cities
    }

    /// One-way latency in ms between nodes hosted in cities `a` and `b`.
    pub fn city_latency(&self, a: usize, b: usize) -> f64 {
        if a == b {
            return SAME_CITY_LATENCY_MS;
        }
        let (ra, rb) = (self.ping_row[a], self.ping_row[b]);
        self.ping[ra * self.rows + rb].max(SAME_CITY_LATENCY_MS)
    }
}

fn check_header(label: &str, rdr: &mut csv::Reader<&[u8]>, expected: &[&str]) -> Result<()> {
    let headers = rdr
        .headers()
        .map_err(|e| Error::dataset(label, e.to_string()))?;
    let got: Vec<&str> = headers.iter().collect();
    if got != expected {
        return Err(Error::dataset(
            label,
            format!("expected header {expected:?}, found {got:?}"),
        ));
    }
    Ok(())
}

fn parse_cities(label: &str, text: &str) -> Result<Vec<City>> {
    let mut rdr = reader(text);
    check_header(label, &mut rdr, &["city", "lat", "lon"])?;
    let mut out: Vec<City> = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::dataset(label, e.to_string()))?;
        let name = rec.get(0).unwrap_or_default().to_string();
        let lat = parse_f64(label, &name, rec.get(1).unwrap_or_default())?;
        let lon = parse_f64(label, &name, rec.get(2).unwrap_or_default())?;
        if !(-90.0..=90.0).contains(&lat) || !(-180.0..=180.0).contains(&lon) {
            return Err(Error::dataset(
                label,
                format!("{name}: coordinates out of range"),
            ));
        }
        if out.iter().any(|c| c.name == name) {
            return Err(Error::dataset(label, format!("duplicate city {name}")));
        }
        out.push(City { name, lat, lon });
    }
    if out.is_empty() {
        return Err(Error::dataset(label, "no cities"));
    }
    Ok(out)
}

/// Returns the city index of each ping row and the symmetrised matrix.
fn parse_pings(
    label: &str,
    text: &str,
    by_name: &HashMap<&str, usize>,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let mut rdr = reader(text);
    let headers = rdr
        .headers()
        .map_err(|e| Error::dataset(label, e.to_string()))?
        .clone();
    if headers.get(0) != Some("city") || headers.len() < 2 {
        return Err(Error::dataset(label, "header must be `city,<name>,...`"));
    }
    let lookup = |name: &str| {
        by_name.get(name).copied().ok_or_else(|| {
            Error::dataset(label, format!("unknown city without coordinates: {name}"))
        })
    };
    let columns: Vec<usize> = headers.iter().skip(1).map(lookup).collect::<Result<_>>()?;
    let m = columns.len();
    let col_of: HashMap<usize, usize> = columns.iter().enumerate().map(|(i, &c)| (c, i)).collect();
    if col_of.len() != m {
        return Err(Error::dataset(label, "duplicate city in header"));
    }

    let mut raw = vec![f64::NAN; m * m];
    let mut seen = vec![false; m];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::dataset(label, e.to_string()))?;
        let name = rec.get(0).unwrap_or_default();
        let city = lookup(name)?;
        let row = *col_of
            .get(&city)
            .ok_or_else(|| Error::dataset(label, format!("row {name} has no header column")))?;
        if std::mem::replace(&mut seen[row], true) {
            return Err(Error::dataset(label, format!("duplicate row {name}")));
        }
        if rec.len() != m + 1 {
            return Err(Error::dataset(
                label,
                format!("row {name} has {} entries, expected {m}", rec.len() - 1),
            ));
        }
        for (j, cell) in rec.iter().skip(1).enumerate() {
            let v = parse_f64(label, name, cell)?;
            if v < 0.0 {
                return Err(Error::dataset(
                    label,
                    format!("negative ping in row {name}"),
                ));
            }
            raw[row * m + j] = v;
        }
    }
    if let Some(missing) = seen.iter().position(|s| !s) {
        return Err(Error::dataset(
            label,
            format!("missing row for a header city (column {})", missing + 1),
        ));
    }
    let mut ping = vec![0.0; m * m];
    for i in 0..m {
        for j in 0..m {
            ping[i * m + j] = if i == j {
                0.0
            } else {
                0.5 * (raw[i * m + j] + raw[j * m + i])
            };
        }
    }
    Ok((columns, ping))
}
