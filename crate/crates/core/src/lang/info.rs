//! Inheritance flattening: per-class concrete subtype sets and inherited
//! attribute sets, plus the lookups the analyses need.

use std::collections::{BTreeMap, BTreeSet};

use serde::Serialize;

use super::ast::{AssociationDecl, Domain, EnumDecl, Metamodel, Value};
use super::LangError;

/// Flattened view of one class.
#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ClassInfo {
    pub name: String,
    pub is_abstract: bool,
    /// Self first, then parent, grandparent, ...
    pub ancestors: Vec<String>,
    /// Concrete classes `D` with `D ⊑ C`, sorted by declaration order.
    pub concrete_subtypes: Vec<String>,
    /// Full attribute set, inherited attributes first.
    pub attributes: Vec<(String, Domain)>,
    /// Declaring class of each attribute.
    pub attribute_owner: BTreeMap<String, String>,
}

/// Flattened metamodel with fast lookups.
#[derive(Clone, Debug)]
pub struct MetamodelInfo {
    pub name: String,
    pub classes: BTreeMap<String, ClassInfo>,
    /// Class names in declaration order.
    pub order: Vec<String>,
    pub associations: BTreeMap<String, AssociationDecl>,
    pub assoc_order: Vec<String>,
    /// Enums visible from this metamodel (own enums shadow foreign ones).
    pub enums: Vec<EnumDecl>,
}

/// Compute the flattened inheritance information of a metamodel.
pub fn flatten_inheritance_info(mm: &Metamodel) -> Result<MetamodelInfo, LangError> {
    MetamodelInfo::build(mm, &[])
}

impl MetamodelInfo {
    /// `foreign_enums` are enums declared in other metamodels of the same file.
    pub fn build(mm: &Metamodel, foreign_enums: &[EnumDecl]) -> Result<Self, LangError> {
        let by_name: BTreeMap<&str, _> = mm.classes.iter().map(|c| (c.name.as_str(), c)).collect();
        let mut classes = BTreeMap::new();
        for c in &mm.classes {
            let mut ancestors = vec![c.name.clone()];
            let mut cur = c;
            while let Some(p) = &cur.parent {
                if ancestors.contains(p) {
                    return Err(LangError::InheritanceCycle(c.name.clone()));
                }
                let parent = by_name
                    .get(p.as_str())
                    .ok_or_else(|| LangError::Unresolved(format!("class `{p}`")))?;
                ancestors.push(p.clone());
                cur = parent;
            }
            let mut attributes = Vec::new();
            let mut owner = BTreeMap::new();
            for anc in ancestors.iter().rev() {
                for a in &by_name[anc.as_str()].attributes {
                    if owner.insert(a.name.clone(), anc.clone()).is_some() {
                        return Err(LangError::Duplicate(format!(
                            "attribute `{}` in flattened class `{}`",
                            a.name, c.name
                        )));
                    }
                    attributes.push((a.name.clone(), a.domain.clone()));
                }
            }
            classes.insert(
                c.name.clone(),
                ClassInfo {
                    name: c.name.clone(),
                    is_abstract: c.is_abstract,
                    ancestors,
                    concrete_subtypes: vec![],
                    attributes,
                    attribute_owner: owner,
                },
            );
        }
        for c in &mm.classes {
            if c.is_abstract {
                continue;
            }
            let ancestors = classes[&c.name].ancestors.clone();
            for anc in ancestors {
                classes
                    .get_mut(&anc)
                    .expect("ancestor resolved above")
                    .concrete_subtypes
                    .push(c.name.clone());
            }
        }
        let mut enums = mm.enums.clone();
        for e in foreign_enums {
            if !enums.iter().any(|x| x.name == e.name) {
                enums.push(e.clone());
            }
        }
        Ok(MetamodelInfo {
            name: mm.name.clone(),
            classes,
            order: mm.classes.iter().map(|c| c.name.clone()).collect(),
            associations: mm
                .associations
                .iter()
                .map(|a| (a.name.clone(), a.clone()))
                .collect(),
            assoc_order: mm.associations.iter().map(|a| a.name.clone()).collect(),
            enums,
        })
    }

    pub fn class(&self, name: &str) -> Option<&ClassInfo> {
        self.classes.get(name)
    }

    pub fn has_class(&self, name: &str) -> bool {
        self.classes.contains_key(name)
    }

    /// `sub ⊑ sup`
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        self.classes
            .get(sub)
            .is_some_and(|c| c.ancestors.iter().any(|a| a == sup))
    }

    /// Two classes may describe a common instance.
    pub fn overlaps(&self, a: &str, b: &str) -> bool {
        self.is_subtype(a, b) || self.is_subtype(b, a)
    }

    pub fn concrete_subtypes(&self, name: &str) -> &[String] {
        self.classes
            .get(name)
            .map(|c| c.concrete_subtypes.as_slice())
            .unwrap_or(&[])
    }

    pub fn concrete_classes(&self) -> impl Iterator<Item = &String> {
        self.order.iter().filter(|c| !self.classes[*c].is_abstract)
    }

    pub fn attribute(&self, class: &str, attr: &str) -> Option<&Domain> {
        self.classes
            .get(class)?
            .attributes
            .iter()
            .find(|(n, _)| n == attr)
            .map(|(_, d)| d)
    }

    /// Class declaring `attr` as seen from `class`.
    pub fn attribute_owner(&self, class: &str, attr: &str) -> Option<&str> {
        self.classes
            .get(class)?
            .attribute_owner
            .get(attr)
            .map(String::as_str)
    }

    pub fn association(&self, name: &str) -> Option<&AssociationDecl> {
        self.associations.get(name)
    }

    pub fn default_value(&self, domain: &Domain) -> Value {
        domain.default_value(&self.enums)
    }

    pub fn domain_contains(&self, domain: &Domain, v: &Value) -> bool {
        domain.contains(v, &self.enums)
    }

    pub fn domain_values(&self, domain: &Domain) -> Option<Vec<Value>> {
        domain.values(&self.enums)
    }

    /// Set of concrete subtypes as an ordered set.
    pub fn concrete_set(&self, name: &str) -> BTreeSet<String> {
        self.concrete_subtypes(name).iter().cloned().collect()
    }
}
