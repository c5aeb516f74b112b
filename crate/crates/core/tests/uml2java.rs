use std::time::Duration;

use dsltrans_core::lang::parse_spec;
use dsltrans_core::verify::{verify_property, Status, VerificationConfig};

fn spec() -> dsltrans_core::lang::Specification {
    parse_spec(include_str!("fixtures/uml2java.dslt")).expect("fixture parses")
}

fn cfg() -> VerificationConfig {
    VerificationConfig { timeout: Duration::from_secs(60), ..Default::default() }
}

#[test]
fn verdicts_and_minimum_bounds() {
    let spec = spec();
    let cases = [
        ("PackageHasPackageDeclaration", Status::Holds),
        ("OwnedPropertyHasOwnedField", Status::Holds),
        ("ClassHasConstructor", Status::Holds),
        ("ClassMappedToInterfaceDeclaration_ShouldFail", Status::Violated),
    ];
    for (name, want) in cases {
        let v = verify_property(&spec, spec.property(name).unwrap(), &cfg());
        assert_eq!(v.status, want, "{name}: {v:?}");
        if want == Status::Violated {
            assert_eq!(v.concrete.as_ref().map(|c| c.holds), Some(false));
        }
    }
}

#[test]
fn package_declaration_needs_two_slots() {
    let spec = spec();
    let v = verify_property(&spec, spec.property("PackageHasPackageDeclaration").unwrap(), &cfg());
    assert_eq!(v.provenance.k, 2);
    assert_eq!(v.provenance.per_class_max, 2);
}
