//! Scenario files: JSON key-value configuration with strict validation,
//! and the mapping from a scenario to per-run configurations.

use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::ConfigError;
use crate::geom::AreaSpec;
use crate::kernel::run_seed;
use crate::traffic::Target;
use crate::world::{ConsumerSpec, ProducerSpec, Roles, RunConfig, Topology};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Daf,
    Flooding,
    SelfLearning,
    Aodv,
}

impl Scheme {
    pub fn is_ndn(self) -> bool {
        self != Scheme::Aodv
    }

    pub fn parse(s: &str) -> Option<Scheme> {
        match s {
            "daf" => Some(Scheme::Daf),
            "flooding" => Some(Scheme::Flooding),
            "self-learning" => Some(Scheme::SelfLearning),
            "aodv" => Some(Scheme::Aodv),
            _ => None,
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Scheme::Daf => "daf",
            Scheme::Flooding => "flooding",
            Scheme::SelfLearning => "self-learning",
            Scheme::Aodv => "aodv",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pattern {
    OneToOne,
    ManyToMany,
    ManyToOne,
}

impl fmt::Display for Pattern {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Pattern::OneToOne => "one-to-one",
            Pattern::ManyToMany => "many-to-many",
            Pattern::ManyToOne => "many-to-one",
        })
    }
}

pub const CONSUMER_COUNT: usize = 10;
pub const DEFAULT_REQUESTS: u32 = 500;
pub const DEFAULT_RATE: f64 = 5.0;
pub const DEFAULT_RUNS: u32 = 10;
pub const DEFAULT_SEED: u64 = 42;
pub const DEFAULT_DURATION_CAP: f64 = 600.0;
pub const DEFAULT_NDN_CS: usize = 200;

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawArea {
    grid_cols: usize,
    grid_rows: usize,
    spacing: f64,
    area_w: f64,
    area_h: f64,
    radio_radius: f64,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    scheme: Scheme,
    nodes: Option<usize>,
    speed: Option<f64>,
    pattern: Option<Pattern>,
    cs_capacity: Option<usize>,
    rtx_max: Option<u32>,
    request_rate: Option<f64>,
    runs: Option<u32>,
    master_seed: Option<u64>,
    duration_cap: Option<f64>,
    requests_per_consumer: Option<u32>,
    /// Explicit opt-out of the "no content store under aodv" rule.
    allow_cs_with_aodv: Option<bool>,
    /// Required for node counts without a preset.
    area: Option<RawArea>,
}

/// Validated experiment configuration.
#[derive(Debug, Clone)]
pub struct ScenarioConfig {
    pub scheme: Scheme,
    pub nodes: usize,
    pub speed: f64,
    pub pattern: Pattern,
    pub cs_capacity: usize,
    pub rtx_max: u32,
    pub request_rate: f64,
    pub runs: u32,
    pub master_seed: u64,
    pub duration_cap: f64,
    pub requests_per_consumer: u32,
    pub allow_cs_with_aodv: bool,
    pub area: AreaSpec,
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        let raw: RawScenario = serde_json::from_str(text)?;
        Self::validate(raw)
    }

    /// A scenario with per-field defaults, for programmatic use.
    pub fn default_for(scheme: Scheme) -> Self {
        ScenarioConfig {
            scheme,
            nodes: 50,
            speed: 0.0,
            pattern: Pattern::OneToOne,
            cs_capacity: if scheme.is_ndn() { DEFAULT_NDN_CS } else { 0 },
            rtx_max: 0,
            request_rate: DEFAULT_RATE,
            runs: DEFAULT_RUNS,
            master_seed: DEFAULT_SEED,
            duration_cap: DEFAULT_DURATION_CAP,
            requests_per_consumer: DEFAULT_REQUESTS,
            allow_cs_with_aodv: false,
            area: AreaSpec::preset_50(),
        }
    }

    fn validate(raw: RawScenario) -> Result<Self, ConfigError> {
        let scheme = raw.scheme;
        let nodes = raw.nodes.unwrap_or(50);
        let area = match (&raw.area, AreaSpec::for_node_count(nodes)) {
            (Some(a), _) => AreaSpec {
                grid_cols: a.grid_cols,
                grid_rows: a.grid_rows,
                spacing: a.spacing,
                area_w: a.area_w,
                area_h: a.area_h,
                radio_radius: a.radio_radius,
            },
            (None, Some(preset)) => preset,
            (None, None) => {
                return Err(ConfigError::invalid(
                    "nodes",
                    format!("{nodes} has no preset; provide an explicit `area`"),
                ))
            }
        };
        if nodes > area.capacity() {
            return Err(ConfigError::invalid(
                "nodes",
                format!("{nodes} nodes exceed the {} grid cells", area.capacity()),
            ));
        }

        let speed = raw.speed.unwrap_or(0.0);
        if !(0.0..=8.0).contains(&speed) {
            return Err(ConfigError::invalid("speed", "must be within 0-8 m/s"));
        }

        let pattern = raw.pattern.unwrap_or(Pattern::OneToOne);
        let producers_needed = match pattern {
            Pattern::ManyToOne => 2,
            _ => CONSUMER_COUNT,
        };
        if nodes < CONSUMER_COUNT + producers_needed {
            return Err(ConfigError::invalid(
                "nodes",
                format!(
                    "pattern {pattern} needs at least {} nodes",
                    CONSUMER_COUNT + producers_needed
                ),
            ));
        }

        let allow_cs_with_aodv = raw.allow_cs_with_aodv.unwrap_or(false);
        let cs_capacity = match raw.cs_capacity {
            Some(cs) => {
                if scheme == Scheme::Aodv && cs != 0 && !allow_cs_with_aodv {
                    return Err(ConfigError::invalid(
                        "cs_capacity",
                        "content store applies only to NDN schemes; \
                         set allow_cs_with_aodv to override",
                    ));
                }
                cs
            }
            None => {
                if scheme.is_ndn() {
                    DEFAULT_NDN_CS
                } else {
                    0
                }
            }
        };

        let rtx_max = raw.rtx_max.unwrap_or(0);
        if rtx_max > 2 {
            return Err(ConfigError::invalid("rtx_max", "must be 0, 1 or 2"));
        }
        let request_rate = raw.request_rate.unwrap_or(DEFAULT_RATE);
        if request_rate <= 0.0 {
            return Err(ConfigError::invalid("request_rate", "must be positive"));
        }
        let runs = raw.runs.unwrap_or(DEFAULT_RUNS);
        if runs == 0 {
            return Err(ConfigError::invalid("runs", "must be at least 1"));
        }
        let duration_cap = raw.duration_cap.unwrap_or(DEFAULT_DURATION_CAP);
        if duration_cap <= 0.0 {
            return Err(ConfigError::invalid("duration_cap", "must be positive"));
        }
        let requests_per_consumer = raw.requests_per_consumer.unwrap_or(DEFAULT_REQUESTS);
        if requests_per_consumer == 0 {
            return Err(ConfigError::invalid(
                "requests_per_consumer",
                "must be at least 1",
            ));
        }

        Ok(ScenarioConfig {
            scheme,
            nodes,
            speed,
            pattern,
            cs_capacity,
            rtx_max,
            request_rate,
            runs,
            master_seed: raw.master_seed.unwrap_or(DEFAULT_SEED),
            duration_cap,
            requests_per_consumer,
            allow_cs_with_aodv,
            area,
        })
    }

    /// Content-store capacity actually applied: the store is disabled
    /// under aodv unless explicitly overridden.
    pub fn effective_cs(&self) -> usize {
        if self.scheme == Scheme::Aodv && !self.allow_cs_with_aodv {
            0
        } else {
            self.cs_capacity
        }
    }

    /// Requester/responder assignment for the communication pattern.
    ///
    /// Nodes 0-9 are requesters. One-to-one pairs requester i with a
    /// dedicated responder 10+i on a unique prefix. Many-to-many splits
    /// ten responders between prefixes /A and /B; many-to-one serves /A
    /// and /B from exactly two responders. IP requesters always target
    /// one responder address.
    pub fn roles(&self) -> Roles {
        let ip = self.scheme == Scheme::Aodv;
        let mut consumers = Vec::new();
        let mut producers = Vec::new();
        match self.pattern {
            Pattern::OneToOne => {
                for i in 0..CONSUMER_COUNT {
                    let prefix = format!("p{i}");
                    let responder = CONSUMER_COUNT + i;
                    producers.push(ProducerSpec {
                        node: responder,
                        prefix: prefix.clone(),
                    });
                    consumers.push(ConsumerSpec {
                        node: i,
                        target: if ip {
                            Target::Addr(responder)
                        } else {
                            Target::Prefix(prefix)
                        },
                    });
                }
            }
            Pattern::ManyToMany => {
                for i in 0..CONSUMER_COUNT {
                    let (prefix, responder) = if i < CONSUMER_COUNT / 2 {
                        ("A", CONSUMER_COUNT + i)
                    } else {
                        ("B", CONSUMER_COUNT + i)
                    };
                    producers.push(ProducerSpec {
                        node: responder,
                        prefix: prefix.to_string(),
                    });
                    consumers.push(ConsumerSpec {
                        node: i,
                        target: if ip {
                            Target::Addr(responder)
                        } else {
                            Target::Prefix(prefix.to_string())
                        },
                    });
                }
            }
            Pattern::ManyToOne => {
                let a = CONSUMER_COUNT;
                let b = CONSUMER_COUNT + 1;
                producers.push(ProducerSpec {
                    node: a,
                    prefix: "A".to_string(),
                });
                producers.push(ProducerSpec {
                    node: b,
                    prefix: "B".to_string(),
                });
                for i in 0..CONSUMER_COUNT {
                    let (prefix, responder) = if i < CONSUMER_COUNT / 2 {
                        ("A", a)
                    } else {
                        ("B", b)
                    };
                    consumers.push(ConsumerSpec {
                        node: i,
                        target: if ip {
                            Target::Addr(responder)
                        } else {
                            Target::Prefix(prefix.to_string())
                        },
                    });
                }
            }
        }
        Roles {
            consumers,
            producers,
        }
    }

    /// Configuration for run `index`, with its derived seed.
    pub fn run_config(&self, index: u32, position_trace: bool) -> RunConfig {
        RunConfig {
            scheme: self.scheme,
            topology: Topology::Grid {
                count: self.nodes,
                area: self.area,
            },
            speed: self.speed,
            roles: self.roles(),
            cs_capacity: self.effective_cs(),
            rtx_max: self.rtx_max,
            request_rate: self.request_rate,
            requests_per_consumer: self.requests_per_consumer,
            seed: run_seed(self.master_seed, u64::from(index)),
            duration_cap: self.duration_cap,
            position_trace,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_fill_in() {
        let cfg = ScenarioConfig::from_json(r#"{"scheme":"daf","nodes":50,"speed":4}"#).unwrap();
        assert_eq!(cfg.cs_capacity, 200);
        assert_eq!(cfg.rtx_max, 0);
        assert_eq!(cfg.request_rate, 5.0);
        assert_eq!(cfg.runs, 10);
        assert_eq!(cfg.pattern, Pattern::OneToOne);
        assert_eq!(cfg.requests_per_consumer, 500);
    }

    #[test]
    fn negative_speed_rejected() {
        assert!(matches!(
            ScenarioConfig::from_json(r#"{"scheme":"daf","speed":-1}"#),
            Err(ConfigError::Invalid { .. })
        ));
    }

    #[test]
    fn cs_under_aodv_rejected_without_override() {
        assert!(ScenarioConfig::from_json(r#"{"scheme":"aodv","cs_capacity":5}"#).is_err());
        let cfg = ScenarioConfig::from_json(
            r#"{"scheme":"aodv","cs_capacity":5,"allow_cs_with_aodv":true}"#,
        )
        .unwrap();
        assert_eq!(cfg.effective_cs(), 5);
    }

    #[test]
    fn aodv_defaults_to_no_cache() {
        let cfg = ScenarioConfig::from_json(r#"{"scheme":"aodv"}"#).unwrap();
        assert_eq!(cfg.cs_capacity, 0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(ScenarioConfig::from_json(r#"{"scheme":"daf","bogus":1}"#).is_err());
    }

    #[test]
    fn missing_scheme_rejected() {
        assert!(matches!(
            ScenarioConfig::from_json(r#"{"nodes":50}"#),
            Err(ConfigError::Parse(_))
        ));
    }

    #[test]
    fn self_learning_name_parses() {
        let cfg = ScenarioConfig::from_json(r#"{"scheme":"self-learning"}"#).unwrap();
        assert_eq!(cfg.scheme, Scheme::SelfLearning);
    }

    #[test]
    fn custom_node_count_needs_area() {
        assert!(ScenarioConfig::from_json(r#"{"scheme":"daf","nodes":30}"#).is_err());
        let cfg = ScenarioConfig::from_json(
            r#"{"scheme":"daf","nodes":30,
                "area":{"grid_cols":6,"grid_rows":5,"spacing":100.0,
                        "area_w":1000.0,"area_h":800.0,"radio_radius":125.0}}"#,
        )
        .unwrap();
        assert_eq!(cfg.nodes, 30);
        assert_eq!(cfg.area.grid_cols, 6);
    }

    #[test]
    fn presets_apply_by_node_count() {
        let cfg = ScenarioConfig::from_json(r#"{"scheme":"daf","nodes":100}"#).unwrap();
        assert_eq!((cfg.area.area_w, cfg.area.area_h), (1500.0, 1500.0));
    }

    #[test]
    fn roles_match_patterns() {
        let mut cfg = ScenarioConfig::default_for(Scheme::Daf);
        cfg.pattern = Pattern::ManyToOne;
        let roles = cfg.roles();
        assert_eq!(roles.producers.len(), 2);
        assert_eq!(roles.consumers.len(), 10);
        assert_eq!(roles.producers[0].prefix, "A");
        assert_eq!(roles.producers[1].prefix, "B");
        assert!(roles
            .consumers
            .iter()
            .take(5)
            .all(|c| c.target == Target::Prefix("A".into())));

        cfg.pattern = Pattern::ManyToMany;
        let roles = cfg.roles();
        assert_eq!(roles.producers.len(), 10);
        let a_count = roles.producers.iter().filter(|p| p.prefix == "A").count();
        assert_eq!(a_count, 5);

        cfg.scheme = Scheme::Aodv;
        cfg.cs_capacity = 0;
        let roles = cfg.roles();
        assert!(roles
            .consumers
            .iter()
            .all(|c| matches!(c.target, Target::Addr(_))));
    }

    #[test]
    fn run_seeds_stable_under_run_count_change() {
        let cfg = ScenarioConfig::default_for(Scheme::Daf);
        let five: Vec<u64> = (0..5).map(|i| cfg.run_config(i, false).seed).collect();
        let ten: Vec<u64> = (0..10).map(|i| cfg.run_config(i, false).seed).collect();
        assert_eq!(five[..], ten[..5]);
    }
}
