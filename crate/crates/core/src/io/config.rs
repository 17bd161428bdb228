//! Flat `key = value` run configuration.
//!
//! Blank lines and everything after `#` are ignored. Values may be wrapped
//! in double quotes; vectors and lists are whitespace separated
//! (`zone_axis = "1 0 1"`). Missing keys keep their defaults.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use crate::adapt::ReferenceShape;
use crate::crystal::{orientation_from_axes, MaterialSpec, ZoneOrientation};
use crate::error::{PitError, Result};
use crate::sim::{PitSpec, SimConfig};

type F64Field = fn(&mut SimConfig) -> &mut f64;
type UsizeField = fn(&mut SimConfig) -> &mut usize;

const F64_KEYS: &[(&str, F64Field)] = &[
    ("z", |c| &mut c.physics.electro.z),
    ("faraday", |c| &mut c.physics.electro.faraday),
    ("gas_const", |c| &mut c.physics.electro.gas_const),
    ("temperature", |c| &mut c.physics.electro.temperature),
    ("v_app", |c| &mut c.physics.electro.v_app),
    ("a_diss", |c| &mut c.physics.electro.a_diss),
    ("c_solid", |c| &mut c.physics.electro.c_solid),
    ("alpha", |c| &mut c.physics.electro.alpha),
    ("sigma_c", |c| &mut c.physics.electro.sigma_c),
    ("vcorr_k", |c| &mut c.physics.vcorr.k_const),
    ("vcorr_s", |c| &mut c.physics.vcorr.s_const),
    ("flux_sign", |c| &mut c.physics.flux_sign),
    ("mu1", |c| &mut c.adapt.mu1),
    ("mu2", |c| &mut c.adapt.mu2),
    ("tau", |c| &mut c.adapt.tau),
    ("theta", |c| &mut c.adapt.theta),
    ("gamma", |c| &mut c.adapt.gamma),
    ("smoothing_tol", |c| &mut c.adapt.smoothing_tol),
    ("mmpde_tol", |c| &mut c.adapt.step_tol),
    ("dt", |c| &mut c.front.dt),
    ("corner_close_factor", |c| &mut c.front.corner_close_factor),
    ("merge_gap_tol", |c| &mut c.front.merge_gap_tol),
    ("newton_abs_tol", |c| &mut c.newton.abs_tol),
    ("newton_rel_tol", |c| &mut c.newton.rel_tol),
    ("newton_step_tol", |c| &mut c.newton.step_tol),
    ("domain_x_min", |c| &mut c.domain.x_min),
    ("domain_x_max", |c| &mut c.domain.x_max),
    ("domain_height", |c| &mut c.domain.height),
    ("mesh_h", |c| &mut c.mesh_h),
    ("t_end", |c| &mut c.t_end),
    ("smooth_dt", |c| &mut c.smooth_dt),
];

const USIZE_KEYS: &[(&str, UsizeField)] = &[
    ("quad_points", |c| &mut c.physics.quad_points),
    ("smoothing_max_iters", |c| &mut c.adapt.smoothing_max_iters),
    ("mmpde_max_iters", |c| &mut c.adapt.step_max_iters),
    ("newton_max_iters", |c| &mut c.newton.max_iters),
    ("pit_nodes", |c| &mut c.pit_nodes),
    ("smooth_physics_every", |c| &mut c.smooth_physics_every),
    ("post_merge_smoothing", |c| &mut c.post_merge_smoothing),
    ("vtk_every", |c| &mut c.vtk_every),
];

const MATERIAL_KEYS: &[&str] = &[
    "material",
    "v_corr",
    "zone_axis",
    "x_dir",
    "zone_axis_left",
    "x_dir_left",
    "zone_axis_right",
    "x_dir_right",
    "x_interface",
];

const OTHER_KEYS: &[&str] = &["reference", "pit_centers", "pit_width", "pit_depth"];

/// One `key = value` line.
#[derive(Clone, Debug)]
struct Entry {
    value: String,
    line: usize,
}

struct Entries<'a> {
    map: HashMap<String, Entry>,
    source: &'a str,
}

impl Entries<'_> {
    fn error(&self, key: &str, line: usize, message: String) -> PitError {
        PitError::Parse {
            path: self.source.to_string(),
            line,
            message: format!("key `{key}`: {message}"),
        }
    }

    fn get(&self, key: &str) -> Option<&Entry> {
        self.map.get(key)
    }

    fn f64(&self, key: &str) -> Result<Option<f64>> {
        self.get(key)
            .map(|e| {
                e.value
                    .parse::<f64>()
                    .map_err(|_| self.error(key, e.line, format!("expected a number, got `{}`", e.value)))
            })
            .transpose()
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.get(key)
            .map(|e| {
                e.value.parse::<usize>().map_err(|_| {
                    self.error(key, e.line, format!("expected a non-negative integer, got `{}`", e.value))
                })
            })
            .transpose()
    }

    fn list(&self, key: &str) -> Result<Option<Vec<f64>>> {
        self.get(key)
            .map(|e| {
                e.value
                    .split_whitespace()
                    .map(|t| t.parse::<f64>())
                    .collect::<std::result::Result<Vec<_>, _>>()
                    .map_err(|_| self.error(key, e.line, format!("expected numbers, got `{}`", e.value)))
            })
            .transpose()
    }

    fn axis(&self, key: &str) -> Result<Option<[i32; 3]>> {
        self.get(key)
            .map(|e| {
                let parts: Vec<i32> = e
                    .value
                    .split_whitespace()
                    .map(|t| t.parse::<i32>())
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|_| {
                        self.error(key, e.line, format!("expected three integers, got `{}`", e.value))
                    })?;
                <[i32; 3]>::try_from(parts).map_err(|_| {
                    self.error(key, e.line, format!("expected three integers, got `{}`", e.value))
                })
            })
            .transpose()
    }

    fn orientation(&self, zone_key: &str, x_key: &str) -> Result<ZoneOrientation> {
        let zone = self.axis(zone_key)?.unwrap_or([0, 0, 1]);
        let x_dir = self.axis(x_key)?.unwrap_or([1, 0, 0]);
        orientation_from_axes(zone, x_dir).map_err(|e| {
            let line = self.get(zone_key).or(self.get(x_key)).map_or(0, |e| e.line);
            self.error(zone_key, line, e.to_string())
        })
    }
}

fn split_lines<'a>(text: &str, source: &'a str) -> Result<Entries<'a>> {
    let mut map: HashMap<String, Entry> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_err = |message: String| PitError::Parse {
            path: source.to_string(),
            line,
            message,
        };
        let (key, value) = content
            .split_once('=')
            .ok_or_else(|| parse_err(format!("expected `key = value`, got `{content}`")))?;
        let key = key.trim();
        let mut value = value.trim();
        if value.len() >= 2 && value.starts_with('"') && value.ends_with('"') {
            value = &value[1..value.len() - 1];
        }
        let known = F64_KEYS.iter().any(|(k, _)| *k == key)
            || USIZE_KEYS.iter().any(|(k, _)| *k == key)
            || MATERIAL_KEYS.contains(&key)
            || OTHER_KEYS.contains(&key);
        if !known {
            return Err(parse_err(format!("unknown key `{key}`")));
        }
        if let Some(prev) = map.get(key) {
            return Err(parse_err(format!("key `{key}` already set on line {}", prev.line)));
        }
        map.insert(
            key.to_string(),
            Entry {
                value: value.to_string(),
                line,
            },
        );
    }
    Ok(Entries { map, source })
}

fn material(entries: &Entries) -> Result<MaterialSpec> {
    fn first_present(entries: &Entries, keys: &[&'static str]) -> Option<&'static str> {
        keys.iter().find(|k| entries.get(k).is_some()).copied()
    }
    let present = |keys: &[&'static str]| first_present(entries, keys);
    let crystal_keys = ["zone_axis", "x_dir"];
    let bicrystal_keys = [
        "zone_axis_left",
        "x_dir_left",
        "zone_axis_right",
        "x_dir_right",
        "x_interface",
    ];
    let kind = match entries.get("material") {
        Some(e) => e.value.clone(),
        None if present(&bicrystal_keys).is_some() => "bicrystal".into(),
        None if present(&crystal_keys).is_some() => "crystal".into(),
        None => "homogeneous".into(),
    };
    let reject = |keys: &[&'static str], kind: &str| -> Result<()> {
        match present(keys) {
            Some(k) => {
                let line = entries.get(k).map_or(0, |e| e.line);
                Err(entries.error(k, line, format!("does not apply to a {kind} material")))
            }
            None => Ok(()),
        }
    };
    match kind.as_str() {
        "homogeneous" => {
            reject(&crystal_keys, "homogeneous")?;
            reject(&bicrystal_keys, "homogeneous")?;
            Ok(MaterialSpec::Homogeneous {
                v_corr: entries.f64("v_corr")?.unwrap_or(-0.24),
            })
        }
        "crystal" => {
            reject(&["v_corr"], "crystal")?;
            reject(&bicrystal_keys, "crystal")?;
            Ok(MaterialSpec::Crystal {
                orientation: entries.orientation("zone_axis", "x_dir")?,
            })
        }
        "bicrystal" => {
            reject(&["v_corr"], "bicrystal")?;
            reject(&crystal_keys, "bicrystal")?;
            Ok(MaterialSpec::Bicrystal {
                x_interface: entries.f64("x_interface")?.unwrap_or(0.0),
                left: entries.orientation("zone_axis_left", "x_dir_left")?,
                right: entries.orientation("zone_axis_right", "x_dir_right")?,
            })
        }
        other => {
            let line = entries.get("material").map_or(0, |e| e.line);
            Err(entries.error(
                "material",
                line,
                format!("expected homogeneous, crystal or bicrystal, got `{other}`"),
            ))
        }
    }
}

fn reference(entries: &Entries) -> Result<Option<ReferenceShape>> {
    let Some(e) = entries.get("reference") else {
        return Ok(None);
    };
    let parts: Vec<&str> = e.value.split_whitespace().collect();
    let shape = match parts.as_slice() {
        ["equilateral_unitary"] => ReferenceShape::EquilateralUnitary,
        ["unit_right"] => ReferenceShape::UnitRight,
        ["equilateral", area] => ReferenceShape::Equilateral {
            area: area.parse().map_err(|_| {
                entries.error("reference", e.line, format!("expected an area, got `{area}`"))
            })?,
        },
        _ => {
            return Err(entries.error(
                "reference",
                e.line,
                format!(
                    "expected equilateral_unitary, unit_right or `equilateral <area>`, got `{}`",
                    e.value
                ),
            ))
        }
    };
    Ok(Some(shape))
}

fn pits(entries: &Entries, defaults: &[PitSpec]) -> Result<Vec<PitSpec>> {
    let first = defaults[0];
    let centers = entries
        .list("pit_centers")?
        .unwrap_or_else(|| defaults.iter().map(|p| p.center).collect());
    let n = centers.len();
    let expand = |key: &str, default: f64| -> Result<Vec<f64>> {
        match entries.list(key)? {
            None => Ok(vec![default; n]),
            Some(v) if v.len() == 1 => Ok(vec![v[0]; n]),
            Some(v) if v.len() == n => Ok(v),
            Some(v) => {
                let line = entries.get(key).map_or(0, |e| e.line);
                Err(entries.error(
                    key,
                    line,
                    format!("has {} entries; expected 1 or one per pit ({n})", v.len()),
                ))
            }
        }
    };
    let widths = expand("pit_width", first.width)?;
    let depths = expand("pit_depth", first.depth)?;
    Ok((0..n)
        .map(|i| PitSpec {
            center: centers[i],
            width: widths[i],
            depth: depths[i],
        })
        .collect())
}

/// Parses configuration text without validating it.
pub fn parse_config_str_unchecked(text: &str, source: &str) -> Result<SimConfig> {
    let entries = split_lines(text, source)?;
    let mut config = SimConfig::default();
    for (key, field) in F64_KEYS {
        if let Some(v) = entries.f64(key)? {
            *field(&mut config) = v;
        }
    }
    for (key, field) in USIZE_KEYS {
        if let Some(v) = entries.usize(key)? {
            *field(&mut config) = v;
        }
    }
    config.physics.material = material(&entries)?;
    if let Some(shape) = reference(&entries)? {
        config.adapt.reference = shape;
    }
    config.pits = pits(&entries, &config.pits)?;
    Ok(config)
}

/// Parses and validates configuration text.
pub fn parse_config_str(text: &str, source: &str) -> Result<SimConfig> {
    let config = parse_config_str_unchecked(text, source)?;
    config.validate()?;
    Ok(config)
}

pub fn parse_config(path: &Path) -> Result<SimConfig> {
    let text = std::fs::read_to_string(path).map_err(|e| PitError::io(path, e))?;
    parse_config_str(&text, &path.display().to_string())
}

fn axis_str(a: [i32; 3]) -> String {
    format!("\"{} {} {}\"", a[0], a[1], a[2])
}

fn list_str(values: &[f64]) -> String {
    let body: Vec<String> = values.iter().map(|v| format!("{v:?}")).collect();
    format!("\"{}\"", body.join(" "))
}

/// Full configuration text; every key is written, so the output parses back
/// to an identical config.
pub fn write_config_string(config: &SimConfig) -> String {
    let mut c = config.clone();
    let mut s = String::new();
    for (key, field) in F64_KEYS {
        let _ = writeln!(s, "{key} = {:?}", *field(&mut c));
    }
    for (key, field) in USIZE_KEYS {
        let _ = writeln!(s, "{key} = {}", *field(&mut c));
    }
    let reference = match config.adapt.reference {
        ReferenceShape::EquilateralUnitary => "equilateral_unitary".to_string(),
        ReferenceShape::UnitRight => "unit_right".to_string(),
        ReferenceShape::Equilateral { area } => format!("\"equilateral {area:?}\""),
    };
    let _ = writeln!(s, "reference = {reference}");
    match &config.physics.material {
        MaterialSpec::Homogeneous { v_corr } => {
            let _ = writeln!(s, "material = homogeneous\nv_corr = {v_corr:?}");
        }
        MaterialSpec::Crystal { orientation } => {
            let _ = writeln!(
                s,
                "material = crystal\nzone_axis = {}\nx_dir = {}",
                axis_str(orientation.axes.0),
                axis_str(orientation.axes.1)
            );
        }
        MaterialSpec::Bicrystal {
            x_interface,
            left,
            right,
        } => {
            let _ = writeln!(
                s,
                "material = bicrystal\nx_interface = {x_interface:?}\nzone_axis_left = {}\nx_dir_left = {}\nzone_axis_right = {}\nx_dir_right = {}",
                axis_str(left.axes.0),
                axis_str(left.axes.1),
                axis_str(right.axes.0),
                axis_str(right.axes.1)
            );
        }
    }
    let column = |f: fn(&PitSpec) -> f64| -> Vec<f64> { config.pits.iter().map(f).collect() };
    let compact = |v: Vec<f64>| {
        if v.len() > 1 && v.iter().all(|x| x.to_bits() == v[0].to_bits()) {
            list_str(&v[..1])
        } else {
            list_str(&v)
        }
    };
    let _ = writeln!(s, "pit_centers = {}", list_str(&column(|p| p.center)));
    let _ = writeln!(s, "pit_width = {}", compact(column(|p| p.width)));
    let _ = writeln!(s, "pit_depth = {}", compact(column(|p| p.depth)));
    s
}

pub fn write_config(config: &SimConfig, path: &Path) -> Result<()> {
    std::fs::write(path, write_config_string(config)).map_err(|e| PitError::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::crystal::MaterialSpec;

    #[test]
    fn empty_file_gives_defaults() {
        let c = parse_config_str("", "empty").unwrap();
        assert_eq!(c, SimConfig::default());
        assert_eq!(c.physics.material, MaterialSpec::Homogeneous { v_corr: -0.24 });
        assert_eq!(c.adapt.mu1, 100.0);
        assert_eq!(c.adapt.mu2, 1.0);
        assert_eq!(c.adapt.tau, 1e-5);
    }

    #[test]
    fn comments_quotes_and_blank_lines() {
        let text = "# header\n\nmu1 = 10   # inline\nt_end = \"60\"\n";
        let c = parse_config_str(text, "t").unwrap();
        assert_eq!(c.adapt.mu1, 10.0);
        assert_eq!(c.t_end, 60.0);
    }

    #[test]
    fn negative_mu1_is_a_validation_error() {
        let err = parse_config_str("mu1 = -1", "t").unwrap_err();
        assert!(err.is_validation());
        assert!(err.to_string().contains("mu1"), "{err}");
    }

    #[test]
    fn unknown_key_names_key_and_line() {
        let err = parse_config_str("mu1 = 1\nbogus = 3\n", "cfg.txt").unwrap_err();
        assert!(err.is_validation());
        let msg = err.to_string();
        assert!(msg.contains("bogus") && msg.contains("cfg.txt:2"), "{msg}");
    }

    #[test]
    fn type_mismatch_names_key_and_line() {
        let err = parse_config_str("\n\npit_nodes = 4.5\n", "c").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("pit_nodes") && msg.contains("c:3"), "{msg}");
    }

    #[test]
    fn duplicate_key_rejected() {
        assert!(parse_config_str("dt = 1\ndt = 2\n", "c").is_err());
    }

    #[test]
    fn zone_axis_gives_crystal() {
        let c = parse_config_str("zone_axis = \"1 0 1\"\nx_dir = \"-1 0 1\"\n", "c").unwrap();
        let MaterialSpec::Crystal { orientation } = c.physics.material else {
            panic!("expected a crystal");
        };
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let m = orientation.matrix();
        // Columns i | j | k with j = k x i.
        let expected = [[-h, 0.0, h], [0.0, -1.0, 0.0], [h, 0.0, h]];
        for r in 0..3 {
            for col in 0..3 {
                assert!((m[(r, col)] - expected[r][col]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn material_keys_must_agree() {
        assert!(parse_config_str("v_corr = -0.2\nzone_axis = \"0 0 1\"\n", "c").is_err());
        assert!(parse_config_str("material = glass\n", "c").is_err());
        assert!(parse_config_str("zone_axis = \"1 0\"\n", "c").is_err());
        assert!(parse_config_str("zone_axis = \"0 0 1\"\nx_dir = \"0 0 1\"\n", "c").is_err());
    }

    #[test]
    fn pit_lists_broadcast() {
        let c = parse_config_str("pit_centers = \"-6 6\"\npit_width = 10\npit_depth = \"5 4\"\n", "c").unwrap();
        assert_eq!(c.pits.len(), 2);
        assert_eq!(c.pits[1].center, 6.0);
        assert_eq!(c.pits[1].width, 10.0);
        assert_eq!(c.pits[1].depth, 4.0);
        assert!(parse_config_str("pit_centers = \"-6 6\"\npit_width = \"1 2 3\"\n", "c").is_err());
    }

    #[test]
    fn round_trip_is_exact() {
        let mut configs = vec![SimConfig::default()];
        let mut c = SimConfig::default();
        c.physics.material = MaterialSpec::Bicrystal {
            x_interface: 0.1,
            left: orientation_from_axes([0, 0, 1], [1, 0, 0]).unwrap(),
            right: orientation_from_axes([1, 0, 1], [-1, 0, 1]).unwrap(),
        };
        c.adapt.reference = ReferenceShape::Equilateral { area: 0.3 };
        c.pits = vec![
            PitSpec {
                center: -6.0,
                width: 10.0,
                depth: 5.0,
            },
            PitSpec {
                center: 6.1,
                width: 9.5,
                depth: 5.0,
            },
        ];
        c.adapt.tau = 1.0 / 3.0;
        c.physics.electro.sigma_c = 1e-7;
        configs.push(c);
        let mut c = SimConfig::default();
        c.physics.material = MaterialSpec::Crystal {
            orientation: orientation_from_axes([1, 0, 1], [-1, 0, 1]).unwrap(),
        };
        configs.push(c);
        for c in configs {
            let text = write_config_string(&c);
            assert_eq!(parse_config_str(&text, "rt").unwrap(), c, "{text}");
        }
    }
}
