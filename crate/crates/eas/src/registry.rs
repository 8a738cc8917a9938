use std::collections::{BTreeMap, BTreeSet};

use edoc_core::xml::Element;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StudentRecord {
    pub name: String,
    pub place_of_birth: String,
    pub enrolled: bool,
    pub exam_rights: BTreeSet<String>,
    pub payments_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExamRecord {
    pub name: String,
    pub faculty: String,
    pub professor_id: String,
}

/// One failed admission check.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Refusal {
    UnknownExam,
    NotEnrolled,
    NoExamRights,
    PaymentDue,
}

impl Refusal {
    pub fn code(self) -> &'static str {
        match self {
            Refusal::UnknownExam => "UNKNOWN_EXAM",
            Refusal::NotEnrolled => "NOT_ENROLLED",
            Refusal::NoExamRights => "NO_EXAM_RIGHTS",
            Refusal::PaymentDue => "PAYMENT_DUE",
        }
    }
}

/// Stand-in for the university's student information system.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct RegistryStub {
    pub students: BTreeMap<String, StudentRecord>,
    pub exams: BTreeMap<String, ExamRecord>,
}

impl RegistryStub {
    /// Runs every admission check and reports each failure.
    pub fn check(&self, student_id: &str, exam_code: &str) -> Vec<Refusal> {
        let mut out = Vec::new();
        if !self.exams.contains_key(exam_code) {
            out.push(Refusal::UnknownExam);
        }
        match self.students.get(student_id) {
            None => out.push(Refusal::NotEnrolled),
            Some(s) => {
                if !s.enrolled {
                    out.push(Refusal::NotEnrolled);
                }
                if !s.exam_rights.contains(exam_code) {
                    out.push(Refusal::NoExamRights);
                }
                if !s.payments_ok {
                    out.push(Refusal::PaymentDue);
                }
            }
        }
        out
    }

    pub fn to_xml(&self) -> Element {
        let mut e = Element::new("registry");
        for (id, s) in &self.students {
            let mut se = Element::new("student")
                .attr("id", id)
                .attr("name", &s.name)
                .attr("placeOfBirth", &s.place_of_birth)
                .attr("enrolled", s.enrolled.to_string())
                .attr("paymentsOk", s.payments_ok.to_string());
            for r in &s.exam_rights {
                se.push(Element::new("right").attr("exam", r));
            }
            e.push(se);
        }
        for (code, x) in &self.exams {
            e.push(
                Element::new("exam")
                    .attr("code", code)
                    .attr("name", &x.name)
                    .attr("faculty", &x.faculty)
                    .attr("professor", &x.professor_id),
            );
        }
        e
    }

    pub fn from_xml(e: &Element) -> Result<Self, String> {
        if e.name != "registry" {
            return Err("expected <registry>".into());
        }
        let get = |e: &Element, n: &str| e.get_attr(n).map(str::to_string).ok_or(format!("<{}> lacks {n}", e.name));
        let flag = |e: &Element, n: &str| match e.get_attr(n) {
            Some("true") => Ok(true),
            Some("false") => Ok(false),
            _ => Err(format!("<{}> needs {n}=true|false", e.name)),
        };
        let mut r = RegistryStub::default();
        for c in e.elements() {
            match c.name.as_str() {
                "student" => {
                    let rec = StudentRecord {
                        name: get(c, "name")?,
                        place_of_birth: get(c, "placeOfBirth")?,
                        enrolled: flag(c, "enrolled")?,
                        payments_ok: flag(c, "paymentsOk")?,
                        exam_rights: c.elements_named("right").map(|x| get(x, "exam")).collect::<Result<_, _>>()?,
                    };
                    r.students.insert(get(c, "id")?, rec);
                }
                "exam" => {
                    let rec = ExamRecord {
                        name: get(c, "name")?,
                        faculty: get(c, "faculty")?,
                        professor_id: get(c, "professor")?,
                    };
                    r.exams.insert(get(c, "code")?, rec);
                }
                other => return Err(format!("unexpected <{other}>")),
            }
        }
        Ok(r)
    }
}
