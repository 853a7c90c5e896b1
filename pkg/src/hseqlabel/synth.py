"""Deterministic generator of annotated synthetic résumés.

Documents follow a familiar skeleton (contact header, dated work and
education groups, skills, languages, references, ...) and carry exact
section, group and entity annotations.

With noise disabled an entity string never changes label within one section
type, but the same string can be an entity in one section and plain text in
another (a city in the contact block versus a work location, the candidate's
phone versus a referee's). Telling those apart needs context beyond the line.
"""

from __future__ import annotations

import dataclasses
import json
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .doc_model import AnnotationSet, EntitySpan, SectionSpan
from .features import EmbeddingTable
from .ingest import CorpusRecord, SplitMix64, make_document, tokenize

FIRST_NAMES = [
    "James", "Maria", "Robert", "Linda", "Michael", "Sarah", "David", "Emily", "Daniel", "Laura", "Kevin",
    "Anna", "Thomas", "Rachel", "Brian", "Olivia", "Jason", "Sophia", "Andrew", "Grace", "Carlos", "Priya",
    "Wei", "Fatima", "Lucas", "Chloe", "Omar", "Hannah", "Mateo", "Ingrid", "Noah", "Amara", "Ethan", "Yuki",
    "Samuel", "Elena", "Victor", "Nadia", "Felix", "Irene",
]
LAST_NAMES = [
    "Smith", "Johnson", "Garcia", "Miller", "Davis", "Martinez", "Lopez", "Wilson", "Anderson", "Taylor",
    "Thomas", "Moore", "Jackson", "Martin", "Lee", "Thompson", "White", "Harris", "Clark", "Lewis", "Walker",
    "Young", "Allen", "King", "Wright", "Scott", "Nguyen", "Patel", "Kim", "Chen", "Okafor", "Novak",
    "Larsen", "Rossi", "Schmidt", "Dubois", "Silva", "Kowalski", "Haddad", "Moreau",
]
STREETS = [
    "Maple", "Oak", "Cedar", "Elm", "Pine", "Washington", "Lake", "Hill", "Park", "Main", "Highland", "Sunset",
    "River", "Church", "Willow", "Chestnut", "Spring", "Forest", "Meadow", "Ridge",
]
STREET_SUFFIXES = ["Street", "Avenue", "Road", "Lane", "Drive", "Boulevard", "Court", "Way"]
CITIES = [
    ("Boston", "MA"), ("Chicago", "IL"), ("Austin", "TX"), ("Denver", "CO"), ("Seattle", "WA"),
    ("Portland", "OR"), ("Atlanta", "GA"), ("Phoenix", "AZ"), ("Dallas", "TX"), ("Miami", "FL"),
    ("Raleigh", "NC"), ("Columbus", "OH"), ("Nashville", "TN"), ("Detroit", "MI"), ("Minneapolis", "MN"),
    ("Pittsburgh", "PA"), ("Sacramento", "CA"), ("Baltimore", "MD"), ("Orlando", "FL"), ("Richmond", "VA"),
    ("Madison", "WI"), ("Tucson", "AZ"), ("Omaha", "NE"), ("Cleveland", "OH"), ("Charlotte", "NC"),
]
STATE_NAMES = {
    "MA": "Massachusetts", "IL": "Illinois", "TX": "Texas", "CO": "Colorado", "WA": "Washington",
    "OR": "Oregon", "GA": "Georgia", "AZ": "Arizona", "FL": "Florida", "NC": "North Carolina", "OH": "Ohio",
    "TN": "Tennessee", "MI": "Michigan", "MN": "Minnesota", "PA": "Pennsylvania", "CA": "California",
    "MD": "Maryland", "VA": "Virginia", "WI": "Wisconsin", "NE": "Nebraska",
}
COMPANY_STEMS = [
    "Acme", "Globex", "Initech", "Umbrella", "Vertex", "Nimbus", "Quantum", "Pinnacle", "Horizon", "Summit",
    "Crescent", "Apex", "Stellar", "Evergreen", "Ironclad", "Bluewave", "Redstone", "Silverline", "Brightpath",
    "Northwind", "Cobalt", "Falcon", "Lumen", "Orion", "Sterling", "Tidal", "Vanguard", "Zenith", "Keystone",
    "Harbor",
]
COMPANY_SUFFIXES = ["Inc.", "Corp", "LLC", "Group", "Technologies", "Solutions", "Systems", "Partners", "Labs"]
SENIORITY = ["Senior", "Junior", "Lead", "Principal", "Associate", "Staff"]
FIELDS = ["Software", "Data", "Marketing", "Financial", "Sales", "Product", "Operations", "Research",
          "Network", "Quality", "Project", "Business", "Mechanical", "Civil", "Human Resources"]
ROLES = ["Engineer", "Analyst", "Manager", "Developer", "Consultant", "Specialist", "Coordinator", "Architect",
         "Scientist", "Administrator", "Designer", "Technician"]
INTERN_ROLES = ["Intern", "Summer Intern", "Trainee", "Co-op Student"]
SCHOOL_PATTERNS = ["University of {city}", "{city} State University", "{stem} College", "{stem} Institute of Technology",
                   "{stem} University"]
DEGREES = ["Bachelor of Science", "Bachelor of Arts", "Master of Science", "Master of Arts",
           "Master of Business Administration", "Doctor of Philosophy", "Associate of Science", "B.Sc.", "M.Sc.",
           "MBA", "PhD"]
MAJORS = ["Computer Science", "Economics", "Mechanical Engineering", "Finance", "Biology", "Mathematics",
          "Psychology", "Marketing", "Electrical Engineering", "Statistics", "Chemistry", "Physics",
          "Information Systems", "Civil Engineering", "Accounting"]
SKILLS = ["Python", "Java", "SQL", "Excel", "Tableau", "AWS", "Docker", "Kubernetes", "Salesforce", "Photoshop",
          "Git", "Linux", "JavaScript", "React", "Spark", "Scrum", "Agile", "SAP", "PowerPoint", "Jira",
          "negotiation", "leadership", "budgeting", "forecasting", "recruiting", "copywriting"]
LANGUAGES = ["English", "Spanish", "French", "German", "Mandarin", "Portuguese", "Italian", "Japanese", "Arabic",
             "Swedish", "Hindi", "Russian", "Korean", "Dutch"]
PROFICIENCY = ["Native", "Fluent", "Professional", "Intermediate", "Basic", "Conversational"]
COURSES = ["Data Structures", "Linear Algebra", "Operating Systems", "Microeconomics", "Reaction Kinetics",
           "Portfolio Theory", "Machine Learning", "Thermodynamics", "Genetics", "Econometrics",
           "Calculus II", "Signal Processing", "Database Design", "Public Speaking"]
CLUBS = ["Robotics", "Debate", "Chess", "Investment", "Photography", "Hiking", "Drama"]
MONTHS = ["Jan", "Feb", "Mar", "Apr", "May", "Jun", "Jul", "Aug", "Sep", "Oct", "Nov", "Dec"]
VERBS = ["Developed", "Managed", "Designed", "Implemented", "Led", "Coordinated", "Improved", "Built", "Analyzed",
         "Launched", "Reduced", "Automated", "Supported", "Negotiated", "Streamlined", "Delivered"]
OBJECTS = ["reporting pipelines", "customer onboarding", "internal tooling", "quarterly budgets", "vendor contracts",
           "test automation", "data warehouse", "marketing campaigns", "release process", "training programs",
           "inventory planning", "mobile features", "cloud migration", "sales forecasts", "support workflows"]
OUTCOMES = ["by 20%", "across three teams", "for key accounts", "ahead of schedule", "with a team of five",
            "for regional offices", "under budget", "for enterprise clients", "in two quarters", ""]
ADJECTIVES = ["motivated", "detail-oriented", "results-driven", "collaborative", "analytical", "creative",
              "dependable", "adaptable"]
AWARDS = ["Employee of the Year", "Dean's List", "President's Award", "Certified Scrum Master",
          "PMP Certification", "Best Paper Award", "Hackathon Winner", "Outstanding Service Award",
          "AWS Certified Architect", "Merit Scholarship"]
EMAIL_DOMAINS = ["gmail.com", "outlook.com", "yahoo.com", "mail.com", "protonmail.com"]

SECTION_HEADERS = {
    "contact": ["CONTACT", "PERSONAL INFORMATION"],
    "summary": ["SUMMARY", "PROFESSIONAL SUMMARY", "PROFILE"],
    "objective": ["OBJECTIVE", "CAREER OBJECTIVE"],
    "work": ["WORK EXPERIENCE", "EXPERIENCE", "EMPLOYMENT HISTORY", "PROFESSIONAL EXPERIENCE"],
    "education": ["EDUCATION", "ACADEMIC BACKGROUND"],
    "internship": ["INTERNSHIPS", "INTERNSHIP EXPERIENCE"],
    "skills": ["SKILLS", "TECHNICAL SKILLS", "CORE COMPETENCIES"],
    "languages": ["LANGUAGES", "LANGUAGE SKILLS"],
    "achievements": ["AWARDS", "CERTIFICATIONS", "HONORS AND AWARDS"],
    "references": ["REFERENCES"],
    "letter": ["COVER LETTER"],
}


@dataclass
class GeneratorProfile:
    """Knobs for :func:`generate_corpus`. Probabilities lie in [0, 1]."""

    seed: int = 0
    count: int = 100
    target_lines: int = 60
    section_probs: dict = field(default_factory=lambda: {
        "summary": 0.7, "objective": 0.35, "internship": 0.4, "skills": 0.9, "languages": 0.6,
        "achievements": 0.55, "references": 0.5, "letter": 0.15,
    })
    work_groups: tuple[int, int] = (2, 4)
    education_groups: tuple[int, int] = (1, 3)
    internship_groups: tuple[int, int] = (1, 2)
    education_first_prob: float = 0.4
    typo_rate: float = 0.0
    section_shuffle_prob: float = 0.0
    distractor_rate: float = 0.0
    first_names: Sequence[str] = tuple(FIRST_NAMES)
    last_names: Sequence[str] = tuple(LAST_NAMES)
    cities: Sequence = tuple(CITIES)
    company_stems: Sequence[str] = tuple(COMPANY_STEMS)
    skills: Sequence[str] = tuple(SKILLS)
    months: Sequence[str] = tuple(MONTHS)

    def __post_init__(self):
        self.cities = tuple(tuple(c) for c in self.cities)
        self.work_groups, self.education_groups = tuple(self.work_groups), tuple(self.education_groups)
        self.internship_groups = tuple(self.internship_groups)
        probs = [self.typo_rate, self.section_shuffle_prob, self.distractor_rate, self.education_first_prob,
                 *self.section_probs.values()]
        if any(not 0.0 <= p <= 1.0 for p in probs):
            raise ValueError("profile probabilities must lie in [0, 1]")
        for name in ("first_names", "last_names", "cities", "company_stems", "skills", "months"):
            if not getattr(self, name):
                raise ValueError(f"lexicon {name!r} is empty")
        if self.count < 0 or self.target_lines < 10:
            raise ValueError("count must be >= 0 and target_lines >= 10")

    @classmethod
    def from_json(cls, obj: dict) -> "GeneratorProfile":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = set(obj) - names
        if unknown:
            raise ValueError(f"unknown profile keys {sorted(unknown)}")
        return cls(**obj)

    @classmethod
    def load(cls, path: str | Path) -> "GeneratorProfile":
        return cls.from_json(json.loads(Path(path).read_text(encoding="utf-8")))


# ---------------------------------------------------------------------------


class _Builder:
    def __init__(self):
        self.lines: list[str] = []
        self.entities: list[EntitySpan] = []
        self.sections: list[SectionSpan] = []
        self.groups: list[SectionSpan] = []
        self.offset = 0
        self._section = None
        self._group = None

    def line(self, *parts) -> None:
        """Append one line; parts are plain strings or ``(text, entity_type)``."""
        text = ""
        for part in parts:
            if isinstance(part, tuple):
                s, typ = part
                self.entities.append(EntitySpan(typ, self.offset + len(text), self.offset + len(text) + len(s)))
                text += s
            else:
                text += part
        self.lines.append(text)
        self.offset += len(text) + 1

    def open_section(self, typ: str) -> None:
        self._section = (typ, len(self.lines))

    def close_section(self) -> None:
        typ, start = self._section
        self.sections.append(SectionSpan(typ, start, len(self.lines) - 1))
        self._section = None

    def open_group(self) -> None:
        self._group = len(self.lines)

    def close_group(self) -> None:
        self.groups.append(SectionSpan(self._section[0], self._group, len(self.lines) - 1))
        self._group = None

    def blank(self) -> None:
        self.line("")

    def record(self, doc_id: str) -> CorpusRecord:
        text = "\n".join(self.lines) + "\n"
        return CorpusRecord(doc_id, text, AnnotationSet.of(self.sections, self.groups, self.entities))


class _Person:
    def __init__(self, rng: random.Random, profile: GeneratorProfile):
        self.first = rng.choice(profile.first_names)
        self.last = rng.choice(profile.last_names)
        self.city, self.state = rng.choice(profile.cities)


def _phone(rng: random.Random) -> str:
    a, b, c = rng.randint(201, 989), rng.randint(200, 999), rng.randint(1000, 9999)
    return rng.choice([f"({a}) {b}-{c}", f"{a}-{b}-{c}", f"+1 {a} {b} {c}", f"{a}.{b}.{c}"])


def _email(rng: random.Random, first: str, last: str) -> str:
    local = rng.choice([f"{first}.{last}", f"{first[0]}{last}", f"{first}{last}{rng.randint(1, 99)}",
                        f"{last}.{first}"])
    return f"{local.lower()}@{rng.choice(EMAIL_DOMAINS)}"


def _company(rng: random.Random, profile: GeneratorProfile) -> str:
    return f"{rng.choice(profile.company_stems)} {rng.choice(COMPANY_SUFFIXES)}"


def _job_title(rng: random.Random) -> str:
    role = f"{rng.choice(FIELDS)} {rng.choice(ROLES)}"
    if rng.random() < 0.4:
        role = f"{rng.choice(SENIORITY)} {role}"
    return role


def _period(rng: random.Random, profile: GeneratorProfile, start_year: int, years: int, open_end: bool) -> str:
    sep = rng.choice([" – ", " - ", " to "])
    end_year = start_year + years
    if rng.random() < 0.6:
        start = f"{rng.choice(profile.months)} {start_year}"
        end = "Present" if open_end else f"{rng.choice(profile.months)} {end_year}"
    elif rng.random() < 0.5:
        start = f"{rng.randint(1, 12):02d}/{start_year}"
        end = "Present" if open_end else f"{rng.randint(1, 12):02d}/{end_year}"
    else:
        start, end = str(start_year), "Present" if open_end else str(end_year)
    return start + sep + end


def _bullet(rng: random.Random) -> str:
    outcome = rng.choice(OUTCOMES)
    text = f"{rng.choice(VERBS)} {rng.choice(OBJECTS)}"
    return rng.choice(["• ", "- ", "* "]) + (f"{text} {outcome}" if outcome else text)


def _prose(rng: random.Random, n_words: int) -> str:
    pool = [rng.choice(ADJECTIVES), "professional", "with", "experience", "in", rng.choice(OBJECTS),
            "and", "a", "record", "of", "results", "team", "player", "focused", "on", "growth", "quality"]
    words = [rng.choice(pool) for _ in range(n_words)]
    return " ".join(words).capitalize() + "."


def _school(rng: random.Random, profile: GeneratorProfile) -> str:
    pat = rng.choice(SCHOOL_PATTERNS)
    return pat.format(city=rng.choice(profile.cities)[0], stem=rng.choice(profile.company_stems[:12]) if "{stem}" in pat else "")


class _Generator:
    def __init__(self, profile: GeneratorProfile, rng: random.Random):
        self.p, self.rng = profile, rng
        self.b = _Builder()
        self.person = _Person(rng, profile)
        self.extra_bullets = 0

    def header(self, section: str) -> None:
        self.b.line(self.rng.choice(SECTION_HEADERS[section]))

    def reachable(self, phone: str, email: str, phone_type: str | None, email_type: str | None) -> None:
        """Phone and email lines; a ``None`` type leaves the value unannotated."""
        ph = (phone, phone_type) if phone_type else phone
        em = (email, email_type) if email_type else email
        r = self.rng
        if r.random() < 0.5:
            self.b.line(r.choice(["Phone: ", "Tel: ", "Mobile: "]), ph)
            self.b.line(r.choice(["Email: ", "E-mail: "]), em)
        else:
            self.b.line(ph, " | ", em)

    def dated(self, period: str, entity: str) -> None:
        """The date line of a work or education group, optionally with a location."""
        r = self.rng
        city, state = r.choice(self.p.cities)
        u = r.random()
        if u < 0.15:
            self.b.line((period, entity))
        elif u < 0.5:
            self.b.line(f"{city}, {state} | ", (period, entity))
        elif u < 0.85:
            self.b.line((period, entity), f" | {city}, {state}")
        else:
            self.b.line((period, entity), f", {city}")

    def address(self, city: str, state_abbr: str, annotate: bool) -> None:
        """Street line plus city, state and zip code, annotated or as plain text."""
        r, b = self.rng, self.b
        tag = (lambda s, t: (s, t)) if annotate else (lambda s, t: s)
        street = f"{r.randint(1, 9999)} {r.choice(STREETS)} {r.choice(STREET_SUFFIXES)}"
        if r.random() < 0.4:
            street += f", Apt {r.randint(1, 40)}{r.choice('ABCD')}"
        zipcode = f"{r.randint(10000, 99999)}"
        state = state_abbr if r.random() < 0.7 else STATE_NAMES[state_abbr]
        place = [tag(city, "city"), ", ", tag(state, "state"), " ", tag(zipcode, "zipcode")]
        if r.random() < 0.5:
            b.line(tag(street, "street_address"))
            b.line(*place)
        else:
            b.line(tag(street, "street_address"), ", ", *place)

    def contact(self) -> None:
        r, b, who = self.rng, self.b, self.person
        b.open_section("contact")
        if r.random() < 0.3:
            self.header("contact")
        b.line((f"{who.first} {who.last}", "name"))
        self.address(who.city, who.state, annotate=True)
        self.reachable(_phone(r), _email(r, who.first, who.last), "phone", "email")
        if r.random() < 0.3:
            b.line(f"linkedin.com/in/{who.first.lower()}{who.last.lower()}")
        b.close_section()

    def prose_section(self, section: str, n_lines: tuple[int, int]) -> None:
        self.b.open_section(section)
        self.header(section)
        for _ in range(self.rng.randint(*n_lines)):
            self.b.line(_prose(self.rng, self.rng.randint(6, 12)))
        self.b.close_section()

    def group(self, heading, period: str, period_type: str, details) -> None:
        """One dated group: heading lines, the date line (first or after the
        heading), then detail lines."""
        self.b.open_group()
        if self.rng.random() < 0.35:
            self.dated(period, period_type)
            heading()
        else:
            heading()
            self.dated(period, period_type)
        details()
        self.b.close_group()

    def experience(self, section: str, n_groups: tuple[int, int]) -> None:
        r, b = self.rng, self.b
        b.open_section(section)
        self.header(section)
        year = r.randint(2012, 2024)
        groups = r.randint(*n_groups)
        for g in range(groups):
            years = r.randint(1, 4)
            start = year - years
            title = _job_title(r) if section == "work" else f"{r.choice(FIELDS)} {r.choice(INTERN_ROLES)}"
            company = _company(r, self.p)
            city, state = r.choice(self.p.cities)
            period = _period(r, self.p, start, years, open_end=(g == 0 and r.random() < 0.3))
            layout = r.random()

            def heading():
                if layout < 0.4:
                    b.line((title, "job_title"))
                    b.line((company, "company"), f", {city}, {state}" if r.random() < 0.5 else "")
                elif layout < 0.7:
                    b.line((company, "company"), " | ", (title, "job_title"), r.choice(["", " (Contract)", " (Remote)"]))
                else:
                    b.line((title, "job_title"), ", ", (company, "company"), f", {city}" if r.random() < 0.5 else "")

            n_bullets = r.randint(1, 3)
            if section == "work" and self.extra_bullets > 0:
                share = -(-self.extra_bullets // (groups - g))
                n_bullets += share
                self.extra_bullets -= share

            def details():
                for _ in range(n_bullets):
                    b.line(_bullet(r))

            self.group(heading, period, "period", details)
            if g < groups - 1 and r.random() < 0.5:
                b.blank()
            year = start - r.randint(0, 1)
        b.close_section()

    def education(self) -> None:
        r, b = self.rng, self.b
        b.open_section("education")
        self.header("education")
        year = r.randint(2012, 2024)
        groups = r.randint(*self.p.education_groups)
        for g in range(groups):
            degree, major = r.choice(DEGREES), r.choice(MAJORS)
            school = _school(r, self.p)
            years = r.randint(1, 4)
            period = _period(r, self.p, year - years, years, open_end=(g == 0 and r.random() < 0.3))
            school_first = r.random() < 0.5

            def heading():
                city, state = r.choice(self.p.cities)
                where = f", {city}, {state}" if r.random() < 0.5 else ""
                honors = r.choice(["", "", " (Honors)", ", with distinction"])
                if school_first:
                    b.line((school, "school_name"), where)
                    b.line((degree, "degree_title"), ", ", (major, "major"), honors)
                else:
                    b.line((degree, "degree_title"), " in ", (major, "major"), honors)
                    b.line((school, "school_name"), where)

            def details():
                if r.random() < 0.6:
                    gpa = f"{r.uniform(2.8, 4.0):.1f}" + r.choice(["/4.0", "", " / 4.0"])
                    b.line("GPA: ", (gpa, "gpa"))
                for _ in range(r.randint(0, 2)):
                    b.line(r.choice(["• ", "- ", "* "]) + r.choice([
                        f"Relevant coursework: {r.choice(COURSES)}, {r.choice(COURSES)}",
                        f"Thesis on {r.choice(OBJECTS)}",
                        f"Member of the {r.choice(CLUBS)} club",
                        f"Teaching assistant for {r.choice(COURSES)}",
                    ]))

            self.group(heading, period, "degree_period", details)
            if g < groups - 1 and r.random() < 0.5:
                b.blank()
            year -= years + r.randint(0, 2)
        b.close_section()

    def skills(self) -> None:
        r, b = self.rng, self.b
        b.open_section("skills")
        self.header("skills")
        for _ in range(r.randint(1, 3)):
            b.line(", ".join(r.sample(list(self.p.skills), r.randint(3, 6))))
        b.close_section()

    def languages(self) -> None:
        r, b = self.rng, self.b
        b.open_section("languages")
        self.header("languages")
        langs = r.sample(LANGUAGES, r.randint(1, 3))
        parts: list = []
        for i, lang in enumerate(langs):
            if i:
                parts.append(", ")
            parts += [(lang, "language_name"), f" ({r.choice(PROFICIENCY)})"]
        b.line(*parts)
        b.close_section()

    def achievements(self) -> None:
        r, b = self.rng, self.b
        b.open_section("achievements")
        self.header("achievements")
        for award in r.sample(AWARDS, r.randint(1, 3)):
            b.line(f"{award}, {r.randint(2008, 2023)}")
        b.close_section()

    def references(self) -> None:
        r, b = self.rng, self.b
        b.open_section("references")
        self.header("references")
        if r.random() < 0.2:
            b.line("Available upon request")
        else:
            # laid out like the contact block, but nothing here is about the candidate
            for k in range(r.randint(1, 2)):
                if k:
                    b.blank()
                first, last = r.choice(self.p.first_names), r.choice(self.p.last_names)
                b.line(f"{first} {last}")
                if r.random() < 0.5:
                    city, state = r.choice(self.p.cities)
                    self.address(city, state, annotate=False)
                else:
                    b.line(f"{_job_title(r)}, {_company(r, self.p)}")
                self.reachable(_phone(r), _email(r, first, last), None, None)
        b.close_section()

    def letter(self) -> None:
        r, b = self.rng, self.b
        b.open_section("letter")
        self.header("letter")
        b.line("Dear Hiring Manager,")
        for _ in range(r.randint(2, 4)):
            b.line(_prose(r, r.randint(8, 14)))
        b.line("Sincerely,")
        b.close_section()

    def distractor(self) -> None:
        """An unannotated line mentioning entity-like strings inside a section."""
        r = self.rng
        city, _ = r.choice(self.p.cities)
        self.b.line(r.choice([
            f"Open to relocation from {city}",
            f"Worked with {_company(r, self.p)} as a client",
            f"Mentored by {r.choice(self.p.first_names)} {r.choice(self.p.last_names)}",
            f"Volunteer {_job_title(r)} at local events",
        ]))

    def build(self, doc_id: str, extra_bullets: int = 0) -> CorpusRecord:
        r, p = self.rng, self.p
        self.extra_bullets = extra_bullets
        b = self.b
        if r.random() < 0.25:
            b.line("CURRICULUM VITAE")
            b.blank()
        self.contact()
        body = []
        if r.random() < p.section_probs["summary"]:
            body.append(lambda: self.prose_section("summary", (1, 3)))
        if r.random() < p.section_probs["objective"]:
            body.append(lambda: self.prose_section("objective", (1, 2)))
        work_at = len(body)
        body.append(lambda: self.experience("work", p.work_groups))
        if r.random() < p.section_probs["internship"]:
            body.append(lambda: self.experience("internship", p.internship_groups))
        # graduates often lead with education
        if r.random() < p.education_first_prob:
            body.insert(work_at, self.education)
        else:
            body.append(self.education)
        for name in ("skills", "languages", "achievements"):
            if r.random() < p.section_probs[name]:
                body.append(getattr(self, name))
        if r.random() < p.section_probs["references"]:
            body.append(self.references)
        if r.random() < p.section_probs["letter"]:
            body.append(self.letter)
        if r.random() < p.section_shuffle_prob:
            r.shuffle(body)
        for make in body:
            b.blank()
            make()
            if r.random() < p.distractor_rate:
                self._extend_last_section(self.distractor)
        rec = b.record(doc_id)
        if p.typo_rate:
            rec = _apply_typos(rec, r, p.typo_rate)
        return rec

    def _extend_last_section(self, emit) -> None:
        b = self.b
        last = b.sections.pop()
        b._section = (last.type, last.start_line)
        emit()
        b.close_section()


def _apply_typos(rec: CorpusRecord, rng: random.Random, rate: float) -> CorpusRecord:
    """Substitute letters in place; lengths and offsets stay unchanged."""
    chars = list(rec.text)
    for i, ch in enumerate(chars):
        if ch.isalpha() and rng.random() < rate:
            repl = rng.choice("abcdefghijklmnopqrstuvwxyz")
            chars[i] = repl.upper() if ch.isupper() else repl
    return CorpusRecord(rec.id, "".join(chars), rec.annotations)


def document_seed(seed: int, index: int) -> int:
    rng = SplitMix64(seed)
    for _ in range(index + 1):
        value = rng.next()
    return value


def generate_document(profile: GeneratorProfile, index: int) -> CorpusRecord:
    """Document ``index`` of the corpus; depends only on the seed and index.

    A first draft measures the natural length, the final draft pads work
    groups with bullets towards a per-document length target.
    """
    seed = document_seed(profile.seed, index)
    doc_id = f"synth-{profile.seed}-{index:05d}"
    draft = _Generator(profile, random.Random(seed)).build(doc_id)
    target = random.Random(seed ^ 0x5DEECE66D).uniform(0.8, 1.2) * profile.target_lines
    extra = max(0, round(target) - draft.text.count("\n"))
    return _Generator(profile, random.Random(seed)).build(doc_id, extra)


def generate_corpus(profile: GeneratorProfile) -> list[CorpusRecord]:
    return [generate_document(profile, i) for i in range(profile.count)]


@dataclass(frozen=True)
class CorpusStats:
    documents: int
    mean_lines: float
    mean_tokens: float


def corpus_stats(records: Sequence[CorpusRecord], language_mode: str = "default") -> CorpusStats:
    if not records:
        raise ValueError("corpus is empty")
    lines = tokens = 0
    for rec in records:
        doc = make_document(rec.id, rec.text, language_mode)
        lines += doc.num_lines
        tokens += sum(1 for t in doc.tokens if not t.is_empty_marker)
    n = len(records)
    return CorpusStats(n, lines / n, tokens / n)


# ---------------------------------------------------------------------------
# Synthetic embeddings


def _lexicon_categories(profile: GeneratorProfile) -> dict[str, list[str]]:
    cities = [c for c, _ in profile.cities]
    states = sorted({s for _, s in profile.cities} | {STATE_NAMES[s] for _, s in profile.cities if s in STATE_NAMES})
    return {
        "person": list(profile.first_names) + list(profile.last_names),
        "place": cities + states + STREETS + STREET_SUFFIXES,
        "org": list(profile.company_stems) + COMPANY_SUFFIXES,
        "role": SENIORITY + FIELDS + ROLES + INTERN_ROLES,
        "academic": DEGREES + MAJORS,
        "skill": list(profile.skills),
        "language": LANGUAGES + PROFICIENCY,
        "time": list(profile.months) + ["Present"],
    }


def synthetic_embeddings(records: Sequence[CorpusRecord], profile: GeneratorProfile | None = None,
                         dim: int = 32, seed: int = 0, spread: float = 0.5) -> EmbeddingTable:
    """A stand-in for pretrained word vectors: lexicon words cluster around a
    per-category centroid, every other corpus word gets an unrelated vector."""
    profile = profile or GeneratorProfile()
    rng = np.random.default_rng(seed)
    vocab: dict[str, int] = {}
    rows: list[np.ndarray] = []

    def add(word: str, vec: np.ndarray) -> None:
        w = word.lower()
        if w not in vocab and w:
            vocab[w] = len(rows)
            rows.append(vec)

    for cat, words in _lexicon_categories(profile).items():
        centroid = rng.normal(size=dim)
        for phrase in words:
            for s, e in tokenize(phrase):
                add(phrase[s:e], centroid + spread * rng.normal(size=dim))
    for rec in records:
        for line in rec.text.split("\n"):
            for s, e in tokenize(line):
                add(line[s:e], rng.normal(size=dim))
    vectors = np.array(rows).reshape(len(rows), dim) / np.sqrt(dim)
    return EmbeddingTable(vocab, vectors)
