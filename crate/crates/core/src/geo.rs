//! Country class trajectories across shocks, continent shift pyramids,
//! continent error bars and fixed/commute cross-tabulations.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::index::ResilienceClass;
use crate::panel::Panel;
use crate::series::{Continent, CountryMetaMap, Year};
use crate::stats::{grouped_errorbars, GroupBy, GroupStats, Selector, StatsError};

#[derive(Debug, Error)]
pub enum GeoError {
    #[error("country {0} has no continent assignment")]
    UnknownContinent(String),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error("geojson: {0}")]
    GeoJson(String),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum TrajectoryStatus {
    Fixed,
    Commute,
    Insufficient,
}

impl TrajectoryStatus {
    pub fn label(self) -> &'static str {
        match self {
            Self::Fixed => "Fixed",
            Self::Commute => "Commute",
            Self::Insufficient => "Insufficient",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CountryTrajectory {
    pub country_code: String,
    pub classes_by_shock: Vec<(Year, Option<ResilienceClass>)>,
    pub status: TrajectoryStatus,
    /// Rounded mean class ordinal, Commute countries only.
    pub average_class: Option<ResilienceClass>,
}

impl CountryTrajectory {
    pub fn from_classes(country_code: &str, classes_by_shock: Vec<(Year, Option<ResilienceClass>)>) -> Self {
        let computable: Vec<ResilienceClass> = classes_by_shock.iter().filter_map(|&(_, c)| c).collect();
        let status = match computable.as_slice() {
            [] | [_] => TrajectoryStatus::Insufficient,
            [first, rest @ ..] if rest.iter().all(|c| c == first) => TrajectoryStatus::Fixed,
            _ => TrajectoryStatus::Commute,
        };
        let average_class = (status == TrajectoryStatus::Commute).then(|| rounded_mean_class(&computable));
        Self { country_code: country_code.to_string(), classes_by_shock, status, average_class }
    }

    /// The class a country is mapped with: its constant class when Fixed,
    /// its average class when Commute.
    pub fn representative_class(&self) -> Option<ResilienceClass> {
        match self.status {
            TrajectoryStatus::Fixed => self.classes_by_shock.iter().find_map(|&(_, c)| c),
            TrajectoryStatus::Commute => self.average_class,
            TrajectoryStatus::Insufficient => None,
        }
    }
}

/// Mean of class ordinals rounded half up, in integer arithmetic.
pub fn rounded_mean_class(classes: &[ResilienceClass]) -> ResilienceClass {
    let n = classes.len() as u32;
    let sum: u32 = classes.iter().map(|c| u32::from(c.ordinal())).sum();
    let rounded = (2 * sum + n) / (2 * n);
    ResilienceClass::from_ordinal(rounded as u8).expect("mean of ordinals stays in 1..=3")
}

pub fn fixed_commute_status(panel: &Panel) -> Vec<CountryTrajectory> {
    let mut by_country: BTreeMap<&str, Vec<(Year, Option<ResilienceClass>)>> = BTreeMap::new();
    for row in &panel.rows {
        by_country.entry(row.country_code.as_str()).or_default().push((row.shock_year, row.class()));
    }
    by_country
        .into_iter()
        .map(|(code, mut classes)| {
            classes.sort_by_key(|&(y, _)| y);
            CountryTrajectory::from_classes(code, classes)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftRecord {
    pub continent: Continent,
    pub shock_year: Year,
    pub net_shift: i64,
}

/// Sums, per continent and shock year, the sign of each class change between
/// consecutive computable shocks of a country. The change is booked at the
/// later shock; the earliest configured shock never receives a record.
pub fn shift_pyramid(panel: &Panel, meta: &CountryMetaMap) -> Result<Vec<ShiftRecord>, GeoError> {
    let mut years = panel.shock_years();
    years.sort_unstable();
    years.dedup();
    let Some((&earliest, later)) = years.split_first() else {
        return Ok(Vec::new());
    };

    let trajectories = fixed_commute_status(panel);
    let mut totals: BTreeMap<(Continent, Year), i64> = BTreeMap::new();
    let mut continents = std::collections::BTreeSet::new();
    for t in &trajectories {
        let continent = meta
            .get(&t.country_code)
            .map(|m| m.continent)
            .ok_or_else(|| GeoError::UnknownContinent(t.country_code.clone()))?;
        continents.insert(continent);
        let computable: Vec<(Year, ResilienceClass)> =
            t.classes_by_shock.iter().filter_map(|&(y, c)| c.map(|c| (y, c))).collect();
        for pair in computable.windows(2) {
            let (_, prev) = pair[0];
            let (year, next) = pair[1];
            let step = i64::from(next.ordinal()).cmp(&i64::from(prev.ordinal())) as i64;
            *totals.entry((continent, year)).or_default() += step;
        }
    }
    debug_assert!(!totals.keys().any(|&(_, y)| y == earliest));
    Ok(continents
        .into_iter()
        .flat_map(|continent| {
            let totals = &totals;
            later.iter().map(move |&year| ShiftRecord {
                continent,
                shock_year: year,
                net_shift: totals.get(&(continent, year)).copied().unwrap_or(0),
            })
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureStats {
    pub measure: String,
    pub stats: GroupStats,
}

/// Continent error bars for `i_r`, `r_en`, `r_ec` and `r_ev`.
pub fn continent_errorbars(panel: &Panel, level: f64) -> Result<Vec<MeasureStats>, GeoError> {
    let mut out = Vec::new();
    for selector in Selector::COMPONENTS.iter() {
        for stats in grouped_errorbars(panel, selector, GroupBy::Continent, level)? {
            out.push(MeasureStats { measure: selector.name().to_string(), stats });
        }
    }
    Ok(out)
}

/// Counts and percentages for one population (Fixed or Commute).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShareTable {
    pub status: TrajectoryStatus,
    pub population: usize,
    pub total_countries: usize,
    pub counts: BTreeMap<Continent, [usize; 3]>,
}

fn pct(part: usize, whole: usize) -> Option<f64> {
    (whole > 0).then(|| 100.0 * part as f64 / whole as f64)
}

impl ShareTable {
    fn class_total(&self, class_idx: usize) -> usize {
        self.counts.values().map(|c| c[class_idx]).sum()
    }

    /// Row percentages across the three classes within one continent.
    pub fn within_continent(&self, continent: Continent) -> [Option<f64>; 3] {
        let row = self.counts.get(&continent).copied().unwrap_or_default();
        let total: usize = row.iter().sum();
        [0, 1, 2].map(|i| pct(row[i], total))
    }

    /// Column percentages across continents within one class.
    pub fn within_class(&self, continent: Continent, class: ResilienceClass) -> Option<f64> {
        let i = class.ordinal() as usize - 1;
        let row = self.counts.get(&continent).copied().unwrap_or_default();
        pct(row[i], self.class_total(i))
    }

    /// Cell count over this population's size.
    pub fn share_of_population(&self, continent: Continent, class: ResilienceClass) -> Option<f64> {
        let i = class.ordinal() as usize - 1;
        let row = self.counts.get(&continent).copied().unwrap_or_default();
        pct(row[i], self.population)
    }

    /// Class share of this population, over all countries.
    pub fn global_share(&self, class: ResilienceClass) -> Option<f64> {
        pct(self.class_total(class.ordinal() as usize - 1), self.total_countries)
    }

    /// Class share within this population.
    pub fn population_class_share(&self, class: ResilienceClass) -> Option<f64> {
        pct(self.class_total(class.ordinal() as usize - 1), self.population)
    }

    /// This population over all countries.
    pub fn population_share(&self) -> Option<f64> {
        pct(self.population, self.total_countries)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassShareTabulation {
    pub fixed: ShareTable,
    pub commute: ShareTable,
    pub insufficient: usize,
}

pub fn class_share_tabulation(
    trajectories: &[CountryTrajectory],
    meta: &CountryMetaMap,
) -> Result<ClassShareTabulation, GeoError> {
    let total = trajectories.len();
    let mut tables = [TrajectoryStatus::Fixed, TrajectoryStatus::Commute].map(|status| ShareTable {
        status,
        population: 0,
        total_countries: total,
        counts: BTreeMap::new(),
    });
    let mut insufficient = 0;
    for t in trajectories {
        let slot = match t.status {
            TrajectoryStatus::Fixed => 0,
            TrajectoryStatus::Commute => 1,
            TrajectoryStatus::Insufficient => {
                insufficient += 1;
                continue;
            }
        };
        let continent = meta
            .get(&t.country_code)
            .map(|m| m.continent)
            .ok_or_else(|| GeoError::UnknownContinent(t.country_code.clone()))?;
        let class = t.representative_class().expect("fixed and commute countries have a class");
        tables[slot].population += 1;
        tables[slot].counts.entry(continent).or_default()[class.ordinal() as usize - 1] += 1;
    }
    let [fixed, commute] = tables;
    Ok(ClassShareTabulation { fixed, commute, insufficient })
}

fn fmt_pct(v: Option<f64>) -> String {
    v.map(|v| format!("{v:.2}")).unwrap_or_default()
}

impl ShareTable {
    /// Cell count over all countries.
    pub fn share_of_all(&self, continent: Continent, class: ResilienceClass) -> Option<f64> {
        let i = class.ordinal() as usize - 1;
        let row = self.counts.get(&continent).copied().unwrap_or_default();
        pct(row[i], self.total_countries)
    }
}

impl ClassShareTabulation {
    /// One row per (population, continent), preceded by a `Global` row per
    /// population that treats all continents as one. Columns per class:
    /// count, within-continent %, within-class %, % of the population, % of
    /// all countries.
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), GeoError> {
        let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(writer);
        let mut header = vec!["population".to_string(), "continent".to_string()];
        for prefix in ["count", "within_continent_pct", "within_class_pct", "of_population_pct", "of_all_countries_pct"]
        {
            for class in ResilienceClass::ALL {
                header.push(format!("{prefix}_{}", class.label().to_lowercase()));
            }
        }
        w.write_record(&header)?;
        for table in [&self.fixed, &self.commute] {
            let idx = |c: ResilienceClass| c.ordinal() as usize - 1;
            let mut global = vec![table.status.label().to_string(), "Global".to_string()];
            global.extend(ResilienceClass::ALL.map(|c| table.class_total(idx(c)).to_string()));
            global.extend(ResilienceClass::ALL.map(|c| fmt_pct(table.population_class_share(c))));
            global.extend(
                ResilienceClass::ALL.map(|c| fmt_pct(pct(table.class_total(idx(c)), table.class_total(idx(c))))),
            );
            global.extend(ResilienceClass::ALL.map(|c| fmt_pct(table.population_class_share(c))));
            global.extend(ResilienceClass::ALL.map(|c| fmt_pct(table.global_share(c))));
            w.write_record(&global)?;
            for (&continent, counts) in &table.counts {
                let mut rec = vec![table.status.label().to_string(), continent.to_string()];
                rec.extend(counts.map(|c| c.to_string()));
                rec.extend(table.within_continent(continent).map(fmt_pct));
                rec.extend(ResilienceClass::ALL.map(|c| fmt_pct(table.within_class(continent, c))));
                rec.extend(ResilienceClass::ALL.map(|c| fmt_pct(table.share_of_population(continent, c))));
                rec.extend(ResilienceClass::ALL.map(|c| fmt_pct(table.share_of_all(continent, c))));
                w.write_record(&rec)?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// `iso3,status,class` rows for any mapping tool. `class` is the fixed
/// class or the rounded average class; empty for Insufficient.
pub fn write_choropleth_join<W: Write>(trajectories: &[CountryTrajectory], writer: W) -> Result<(), GeoError> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(writer);
    w.write_record(["iso3", "status", "class"])?;
    for t in trajectories {
        let class = t.representative_class().map(|c| c.label()).unwrap_or("");
        w.write_record([t.country_code.as_str(), t.status.label(), class])?;
    }
    w.flush()?;
    Ok(())
}

const ISO3_KEYS: [&str; 5] = ["ISO_A3", "iso_a3", "ISO3", "iso3", "ADM0_A3"];

/// Adds `resilience_status` and `resilience_class` properties to every
/// feature of a FeatureCollection whose ISO3 code has a trajectory. The code
/// is looked up in the usual property names, then in the feature `id`.
pub fn join_geojson(collection: &mut Value, trajectories: &[CountryTrajectory]) -> Result<usize, GeoError> {
    let by_code: BTreeMap<&str, &CountryTrajectory> =
        trajectories.iter().map(|t| (t.country_code.as_str(), t)).collect();
    let features = collection
        .get_mut("features")
        .and_then(Value::as_array_mut)
        .ok_or_else(|| GeoError::GeoJson("expected a FeatureCollection with `features`".into()))?;
    let mut joined = 0;
    for feature in features {
        let code = ISO3_KEYS
            .iter()
            .find_map(|k| feature.get("properties")?.get(*k)?.as_str())
            .or_else(|| feature.get("id")?.as_str())
            .map(str::to_string);
        let Some(t) = code.as_deref().and_then(|c| by_code.get(c)) else {
            continue;
        };
        let props = feature
            .as_object_mut()
            .ok_or_else(|| GeoError::GeoJson("feature is not an object".into()))?
            .entry("properties")
            .or_insert_with(|| Value::Object(Default::default()));
        let props = props.as_object_mut().ok_or_else(|| GeoError::GeoJson("properties is not an object".into()))?;
        props.insert("resilience_status".into(), Value::from(t.status.label()));
        props.insert(
            "resilience_class".into(),
            t.representative_class().map_or(Value::Null, |c| Value::from(c.label())),
        );
        joined += 1;
    }
    Ok(joined)
}
