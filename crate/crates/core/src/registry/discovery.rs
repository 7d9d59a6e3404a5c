//! Discovery, producer and successor queries.

use std::cmp::Ordering;

use serde::{Deserialize, Serialize};

use super::{NfFilter, Registry, ServiceProfile, StatusPattern};
use crate::error::RegistryError;
use crate::ontology::{ClassRef, Degree, MatchDegree, OntologyStore};
use crate::semantics::{status_degree, StatusKey};

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DiscoveryQuery {
    #[serde(default)]
    pub required_inputs: Vec<ClassRef>,
    #[serde(default)]
    pub desired_outputs: Vec<ClassRef>,
    #[serde(default)]
    pub desired_effects: Vec<StatusPattern>,
    #[serde(default)]
    pub nonfunctional_filters: Vec<NfFilter>,
    /// `None` means unlimited.
    #[serde(default)]
    pub max_results: Option<usize>,
}

impl DiscoveryQuery {
    pub fn outputs(classes: &[&str]) -> Self {
        Self {
            desired_outputs: classes.iter().map(|c| ClassRef::new(*c)).collect(),
            ..Default::default()
        }
    }

    fn is_empty(&self) -> bool {
        self.required_inputs.is_empty()
            && self.desired_outputs.is_empty()
            && self.desired_effects.is_empty()
            && self.nonfunctional_filters.is_empty()
    }
}

/// One satisfied criterion and the profile element satisfying it.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct CriterionMatch {
    pub criterion: String,
    pub matched_by: String,
    pub degree: MatchDegree,
}

/// Aggregate score, compared lexicographically: more Exact criteria, then
/// more Plugin criteria, then smaller total distance.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Score {
    pub exact: u32,
    pub plugin: u32,
    pub distance: u32,
}

impl Score {
    pub fn of<'a>(degrees: impl IntoIterator<Item = &'a MatchDegree>) -> Self {
        let mut s = Score::default();
        for d in degrees {
            match d.degree {
                Degree::Exact => s.exact += 1,
                Degree::Plugin => s.plugin += 1,
                _ => {}
            }
            s.distance += d.distance.unwrap_or(0);
        }
        s
    }
}

impl Ord for Score {
    /// `Greater` means better.
    fn cmp(&self, other: &Self) -> Ordering {
        self.exact
            .cmp(&other.exact)
            .then(self.plugin.cmp(&other.plugin))
            .then(other.distance.cmp(&self.distance))
    }
}

impl PartialOrd for Score {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ServiceMatch {
    pub id: String,
    pub name: String,
    pub criteria: Vec<CriterionMatch>,
    pub score: Score,
    /// Set when the match relies only on Subsume-degree links.
    #[serde(default)]
    pub weak: bool,
}

impl ServiceMatch {
    fn new(profile: &ServiceProfile, criteria: Vec<CriterionMatch>) -> Self {
        let score = Score::of(criteria.iter().map(|c| &c.degree));
        let weak = !criteria.is_empty() && criteria.iter().all(|c| !c.degree.degree.is_safe());
        Self {
            id: profile.id.clone(),
            name: profile.name.clone(),
            criteria,
            score,
            weak,
        }
    }
}

/// Target of a producer query.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Target {
    Class(ClassRef),
    Status(StatusPattern),
}

fn sort_matches(matches: &mut [ServiceMatch]) {
    matches.sort_by(|a, b| b.score.cmp(&a.score).then_with(|| a.id.cmp(&b.id)));
}

fn best<T>(items: impl IntoIterator<Item = (MatchDegree, T)>, accept: impl Fn(Degree) -> bool) -> Option<(MatchDegree, T)> {
    let mut out: Option<(MatchDegree, T)> = None;
    for (d, t) in items {
        if !accept(d.degree) {
            continue;
        }
        if out.as_ref().is_none_or(|(b, _)| d.rank_key() < b.rank_key()) {
            out = Some((d, t));
        }
    }
    out
}

fn add_effects(profile: &ServiceProfile) -> impl Iterator<Item = (StatusKey, String)> + '_ {
    profile.effects.iter().flat_map(move |e| {
        e.adds
            .iter()
            .map(move |a| (StatusKey::of(a, Some(profile)), format!("{}:{}", e.label, a.class)))
    })
}

impl Registry {
    /// Profiles satisfying every criterion of `query` with safe (Exact or
    /// Plugin) matches, best first.
    pub fn discover(&self, query: &DiscoveryQuery, ontology: &OntologyStore) -> Result<Vec<ServiceMatch>, RegistryError> {
        if query.is_empty() {
            return Err(RegistryError::EmptyQuery);
        }
        ontology.closure()?;
        let wanted_effects: Vec<StatusKey> = query.desired_effects.iter().map(|p| StatusKey::of(p, None)).collect();
        let mut out = Vec::new();
        'profiles: for profile in self.profiles() {
            if !query.nonfunctional_filters.iter().all(|f| f.passes(&profile.nonfunctional, ontology)) {
                continue;
            }
            let mut criteria = Vec::new();
            for want in &query.desired_outputs {
                let found = best(
                    profile
                        .outputs
                        .iter()
                        .map(|o| (ontology.match_degree_lenient(&o.ty, want), &o.name)),
                    Degree::is_safe,
                );
                let Some((degree, name)) = found else { continue 'profiles };
                criteria.push(CriterionMatch {
                    criterion: format!("output:{want}"),
                    matched_by: name.clone(),
                    degree,
                });
            }
            for (pattern, want) in query.desired_effects.iter().zip(&wanted_effects) {
                let found = best(
                    add_effects(profile).map(|(k, label)| (status_degree(ontology, &k, want), label)),
                    Degree::is_safe,
                );
                let Some((degree, label)) = found else { continue 'profiles };
                criteria.push(CriterionMatch {
                    criterion: format!("effect:{}", pattern.class),
                    matched_by: label,
                    degree,
                });
            }
            if !query.required_inputs.is_empty() {
                for input in &profile.inputs {
                    let found = best(
                        query
                            .required_inputs
                            .iter()
                            .map(|s| (ontology.match_degree_lenient(s, &input.ty), s)),
                        Degree::is_safe,
                    );
                    let Some((degree, supplied)) = found else { continue 'profiles };
                    criteria.push(CriterionMatch {
                        criterion: format!("input:{}", input.name),
                        matched_by: supplied.to_string(),
                        degree,
                    });
                }
            }
            out.push(ServiceMatch::new(profile, criteria));
        }
        sort_matches(&mut out);
        if let Some(max) = query.max_results {
            out.truncate(max);
        }
        Ok(out)
    }

    /// Services whose outputs (class target) or add-effects (status target)
    /// fall under `target`.
    pub fn producers_of(&self, target: &Target, ontology: &OntologyStore) -> Result<Vec<ServiceMatch>, RegistryError> {
        ontology.closure()?;
        let mut out = Vec::new();
        match target {
            Target::Class(class) => {
                if !ontology.resolves(class) {
                    return Err(RegistryError::UnresolvableTarget(class.to_string()));
                }
                for profile in self.profiles() {
                    let found = best(
                        profile
                            .outputs
                            .iter()
                            .map(|o| (ontology.match_degree_lenient(&o.ty, class), &o.name)),
                        Degree::is_safe,
                    );
                    if let Some((degree, name)) = found {
                        let c = CriterionMatch {
                            criterion: format!("output:{class}"),
                            matched_by: name.clone(),
                            degree,
                        };
                        out.push(ServiceMatch::new(profile, vec![c]));
                    }
                }
            }
            Target::Status(pattern) => {
                if !ontology.resolves(&pattern.class) {
                    return Err(RegistryError::UnresolvableTarget(pattern.class.to_string()));
                }
                let want = StatusKey::of(pattern, None);
                for profile in self.profiles() {
                    let found = best(
                        add_effects(profile).map(|(k, label)| (status_degree(ontology, &k, &want), label)),
                        Degree::is_safe,
                    );
                    if let Some((degree, label)) = found {
                        let c = CriterionMatch {
                            criterion: format!("effect:{}", pattern.class),
                            matched_by: label,
                            degree,
                        };
                        out.push(ServiceMatch::new(profile, vec![c]));
                    }
                }
            }
        }
        sort_matches(&mut out);
        Ok(out)
    }

    /// Services (other than `id`) with an input fed by one of `id`'s outputs,
    /// or a precondition added by one of its effects. Subsume-degree links
    /// count and are flagged weak.
    pub fn successors_of(&self, id: &str, ontology: &OntologyStore) -> Result<Vec<ServiceMatch>, RegistryError> {
        let source = self
            .get(id)
            .ok_or_else(|| RegistryError::UnknownService(id.to_string()))?;
        ontology.closure()?;
        let adds: Vec<(StatusKey, String)> = add_effects(source).collect();
        let mut out = Vec::new();
        for profile in self.profiles().filter(|p| p.id != id) {
            let mut criteria = Vec::new();
            for input in &profile.inputs {
                let found = best(
                    source
                        .outputs
                        .iter()
                        .map(|o| (ontology.match_degree_lenient(&o.ty, &input.ty), &o.name)),
                    |d| d != Degree::Fail,
                );
                if let Some((degree, name)) = found {
                    criteria.push(CriterionMatch {
                        criterion: format!("input:{}", input.name),
                        matched_by: name.clone(),
                        degree,
                    });
                }
            }
            for pre in &profile.preconditions {
                let want = StatusKey::of(pre, Some(profile));
                let found = best(
                    adds.iter()
                        .map(|(k, label)| (status_degree(ontology, k, &want), label)),
                    Degree::is_safe,
                );
                if let Some((degree, label)) = found {
                    criteria.push(CriterionMatch {
                        criterion: format!("precondition:{}", pre.class),
                        matched_by: label.clone(),
                        degree,
                    });
                }
            }
            if !criteria.is_empty() {
                out.push(ServiceMatch::new(profile, criteria));
            }
        }
        sort_matches(&mut out);
        Ok(out)
    }
}
