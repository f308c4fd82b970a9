// SPDX-License-Identifier: Apache-2.0

//! Regenerates the synthetic fixture corpus under `fixtures/`.
//!
//! ```text
//! cargo run -p lexstrata --example make_fixture -- crates/core/fixtures
//! ```
//!
//! Per-language totals, coded counts, residual counts, loans and rescues
//! follow the six-language South Sulawesi layout the tests expect. Forms
//! are invented; residual forms are drawn from a noisier phonotactic
//! generator so classifiers have a real but imperfect signal.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const GLOSSES: &str = "hand|left|right|leg/foot|to walk|road/path|to come|to turn|to swim|dirty|\
dust|skin|back|belly|bone|intestines|liver|breast|shoulder|to know|to think|to fear|blood|head|\
neck|hair|nose|to breathe|to sniff/smell|mouth|tooth|tongue|to laugh|to cry|to vomit|to spit|\
to eat|to chew|to cook|to drink|to bite|to suck|ear|to hear|eye|to see|to yawn|to sleep|\
to lie down|to dream|to sit|to stand|person/human being|man/male|woman/female|child|husband|\
wife|mother|father|house|thatch/roof|name|to say|rope|to tie up/fasten|to sew|needle|to hunt|\
to shoot|to stab/pierce|to hit|to steal|to kill|to die/be dead|to live/be alive|to scratch|\
to cut/hack|stick/wood|to split|sharp|dull/blunt|to work in garden|to plant|to choose|to grow|\
to swell|to squeeze|to hold|to dig|to buy|to open/uncover|to pound/beat|to throw|to fall|dog|\
bird|egg|feather|wing|to fly|rat|meat/flesh|fat/grease|tail|snake|worm (earthworm)|louse|\
mosquito|spider|fish|rotten|branch|leaf|root|flower|fruit|grass|earth/soil|stone|sand|water|\
to flow|sea|salt|lake|woods/forest|sky|moon|star|cloud|fog|rain|thunder|lightning|wind|\
to blow|warm|cold|dry|wet|heavy|fire|to burn|smoke|ash|black|white|red|yellow|green|small|big|\
short|long|thin|thick|narrow|wide|painful/sick|shy/ashamed|old|new|good|bad/evil|correct/true|\
night|day|year|when?|to hide|to climb|at|in/inside|above|below|this|that|near|far|where?|I|\
thou|he/she|we|you|they|what?|who?|other|all|and|if|how?|no/not|to count|one|two|three|four|\
five|six|seven|eight|nine|ten|twenty|fifty|one hundred|one thousand";

/// Concept numbers on the 100-item basic list.
const SWADESH100: &[usize] = &[
    1, 4, 5, 7, 12, 14, 15, 18, 23, 24, 25, 26, 27, 30, 31, 32, 37, 40, 41, 43, 44, 45, 46, 48,
    51, 52, 53, 54, 55, 63, 64, 74, 75, 9, 96, 97, 98, 99, 101, 103, 104, 105, 108, 111, 114,
    115, 119, 120, 121, 122, 129, 130, 131, 133, 138, 139, 140, 143, 144, 145, 146, 147, 148,
    149, 150, 151, 152, 153, 155, 163, 164, 167, 177, 178, 182, 183, 185, 188, 189, 191, 195,
    197, 198, 17, 19, 6, 49, 56, 60, 59, 13, 62, 65, 66, 79, 90, 84, 110, 106, 102,
];

const BODY: &[usize] = &[1, 4, 12, 13, 14, 15, 16, 17, 18, 19, 23, 24, 25, 26, 27, 30, 31, 32, 43, 45];
const QUALITY: &[usize] = &[
    2, 3, 10, 81, 82, 112, 138, 139, 140, 141, 142, 147, 148, 149, 150, 151, 152, 153, 154, 155,
    156, 157, 158, 159, 160, 161, 162, 163, 164, 165, 166, 179, 180,
];
const NATURE: &[usize] = &[
    11, 96, 97, 98, 99, 100, 102, 103, 104, 105, 106, 107, 108, 109, 110, 111, 113, 114, 115,
    116, 117, 118, 119, 120, 121, 122, 124, 125, 126, 127, 128, 129, 130, 131, 132, 133, 134,
    135, 136, 143, 145, 146, 167, 168, 169,
];

struct Language {
    id: &'static str,
    total: usize,
    residual: usize,
    loans: usize,
    rescues: usize,
    /// Character rewrites applied to mainstream roots.
    shifts: &'static [(char, char)],
    keep_final: bool,
}

const LANGUAGES: [Language; 6] = [
    Language { id: "muna", total: 219, residual: 26, loans: 0, rescues: 8, shifts: &[('j', 'd'), ('r', 'l')], keep_final: false },
    Language { id: "bugis", total: 242, residual: 49, loans: 1, rescues: 12, shifts: &[('w', 'b')], keep_final: true },
    Language { id: "torajasadan", total: 216, residual: 32, loans: 1, rescues: 12, shifts: &[], keep_final: false },
    Language { id: "wolio", total: 254, residual: 68, loans: 1, rescues: 14, shifts: &[('r', 'l'), ('p', 'f')], keep_final: false },
    Language { id: "makassar", total: 217, residual: 67, loans: 1, rescues: 12, shifts: &[('s', 'c')], keep_final: true },
    Language { id: "tolaki", total: 209, residual: 114, loans: 3, rescues: 17, shifts: &[('b', 'w'), ('d', 'r')], keep_final: false },
];

/// Concepts residual in at least five languages.
const TIER_ONE: [usize; 8] = [41, 153, 193, 66, 77, 10, 88, 110];

/// (concept, reflex root, proto-form). Fifteen distinct proto-forms.
const RESCUES: [(usize, &str, &str); 17] = [
    (1, "lima", "*lima"),
    (201, "lima", "*lima"),
    (45, "mata", "*mata"),
    (120, "batu", "*batu"),
    (96, "asu", "*qasu"),
    (97, "manu", "*manuk"),
    (108, "kutu", "*kutu"),
    (35, "muta", "*utaq"),
    (40, "inu", "*inum"),
    (37, "kande", "*kaen"),
    (75, "mate", "*matay"),
    (61, "bola", "*Rumaq"),
    (26, "bulu", "*bulu"),
    (99, "bulu", "*bulu"),
    (23, "dara", "*daRaq"),
    (143, "api", "*Sapuy"),
    (6, "jala", "*zalan"),
];

const LOAN_WORDS: [(&str, &str); 7] = [
    ("bugis", "kadera"),
    ("torajasadan", "sapatu"),
    ("wolio", "kareta"),
    ("makassar", "jandela"),
    ("tolaki", "botolo"),
    ("tolaki", "sabun"),
    ("tolaki", "kampilo"),
];

const VOWELS: &[char] = &['a', 'a', 'a', 'i', 'i', 'u', 'u', 'e', 'o'];
const MAIN_ONSETS: &[char] = &['m', 'b', 't', 'k', 'p', 's', 'm', 'b', 't', 'k', 'p', 's', 'l', 'r', 'n', 'd', 'w', 'j', 'g'];
const RESID_ONSETS: &[char] = &['g', 'd', 'w', 'l', 'r', 'c', 'j', 'n', 'k', 't', 'b', 'g', 'd', 'l'];
const FINALS: &[char] = &['k', 't', 'n', 'm', 'l', 's', 'r'];
const MAIN_CLUSTERS: &[&str] = &["mb", "nd", "mp", "nt"];
const RESID_CLUSTERS: &[&str] = &["nc", "nk", "ns", "rk", "lt", "mb", "nd", "tt", "kk", "rr", "mp", "nt", "lk", "rt"];
const PLAIN_PREFIXES: &[&str] = &["ma", "pa", "me", "po", "ka"];

fn pick<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    xs[rng.gen_range(0..xs.len())]
}

fn forbidden(s: &str) -> bool {
    s.contains('h') || s.contains('y') || s.contains("ng")
}

fn mainstream_root(rng: &mut ChaCha8Rng) -> String {
    let syllables = if rng.gen_bool(0.62) { 2 } else { 3 };
    let mut s = String::new();
    for k in 0..syllables {
        if k > 0 && rng.gen_bool(0.12) {
            s.push_str(pick(rng, MAIN_CLUSTERS));
        } else if k == 0 && rng.gen_bool(0.1) {
            // vowel-initial
        } else {
            s.push(pick(rng, MAIN_ONSETS));
        }
        s.push(pick(rng, VOWELS));
    }
    if rng.gen_bool(0.25) {
        s.push(pick(rng, FINALS));
    }
    if rng.gen_bool(0.1) {
        s = format!("{}{}", pick(rng, PLAIN_PREFIXES), s);
    }
    s
}

fn residual_form(rng: &mut ChaCha8Rng) -> String {
    let syllables = *[2usize, 3, 3, 3, 4].choose(rng).unwrap();
    let mut s = String::new();
    for k in 0..syllables {
        if k > 0 && rng.gen_bool(0.3) {
            s.push_str(pick(rng, RESID_CLUSTERS));
        } else {
            s.push(pick(rng, RESID_ONSETS));
        }
        s.push(pick(rng, VOWELS));
        if k + 1 < syllables && rng.gen_bool(0.15) {
            s.push('\'');
        }
    }
    if rng.gen_bool(0.4) {
        s.push(pick(rng, FINALS));
    } else if rng.gen_bool(0.2) {
        s.push('\'');
    }
    if rng.gen_bool(0.08) {
        let head: String = s.chars().take(4).collect();
        s = format!("{head}-{s}");
    }
    s
}

fn reflex(root: &str, lang: &Language, rng: &mut ChaCha8Rng) -> String {
    let mut out: String = root
        .chars()
        .map(|c| lang.shifts.iter().find(|(a, _)| *a == c).map_or(c, |(_, b)| *b))
        .collect();
    if !lang.keep_final && out.chars().last().is_some_and(|c| !"aeiou".contains(c)) {
        out.pop();
    }
    if rng.gen_bool(0.15) {
        // sporadic vowel change
        let mut chars: Vec<char> = out.chars().collect();
        let vs: Vec<usize> = (0..chars.len()).filter(|&i| "aeiou".contains(chars[i])).collect();
        if let Some(&i) = vs.choose(rng) {
            chars[i] = pick(rng, VOWELS);
        }
        out = chars.into_iter().collect();
    }
    out
}

fn slug(gloss: &str) -> String {
    gloss.chars().filter(|c| c.is_ascii_alphanumeric()).collect::<String>().to_lowercase()
}

fn domain(n: usize, gloss: &str) -> &'static str {
    if gloss.starts_with("to ") {
        "ACTION"
    } else if n >= 197 {
        "NUMBER"
    } else if BODY.contains(&n) {
        "BODY"
    } else if QUALITY.contains(&n) {
        "QUALITY"
    } else if NATURE.contains(&n) {
        "NATURE"
    } else if (170..=195).contains(&n) {
        "GRAMMAR"
    } else {
        "OTHER"
    }
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Role {
    Coded,
    Residual,
    Loan,
    Rescue,
}

struct Row {
    id: String,
    lang: usize,
    concept: usize,
    form: String,
    raw: String,
    codes: Vec<String>,
    flagged: bool,
    role: Role,
}

struct Concept {
    id: String,
    gloss: String,
    /// Cognate-set roots.
    sets: Vec<String>,
}

fn concepts(rng: &mut ChaCha8Rng) -> Vec<Concept> {
    let glosses: Vec<&str> = GLOSSES.split('|').collect();
    assert_eq!(glosses.len(), 210);
    glosses
        .iter()
        .enumerate()
        .map(|(i, g)| {
            let n = i + 1;
            let n_sets = *[1usize, 1, 2, 2, 3].choose(rng).unwrap();
            let sets = (0..n_sets)
                .map(|_| loop {
                    let r = mainstream_root(rng);
                    if !forbidden(&r) {
                        break r;
                    }
                })
                .collect();
            Concept { id: format!("{n}_{}", slug(g)), gloss: g.to_string(), sets }
        })
        .collect()
}

/// Concept slots per language: every concept once, then synonyms; Tolaki
/// drops concepts to reach its total.
fn slots(lang: &Language, rng: &mut ChaCha8Rng, protected: &BTreeSet<usize>) -> Vec<usize> {
    let mut v: Vec<usize> = (1..=210).collect();
    while v.len() > lang.total {
        let i = rng.gen_range(0..v.len());
        if !protected.contains(&v[i]) {
            v.remove(i);
        }
    }
    while v.len() < lang.total {
        let c = rng.gen_range(1..=210);
        if !protected.contains(&c) {
            v.push(c);
        }
    }
    v.sort_unstable();
    v
}

fn plant(form: &str, digraph: &str, rng: &mut ChaCha8Rng) -> Option<String> {
    let chars: Vec<char> = form.chars().collect();
    let spots: Vec<usize> = (1..chars.len().saturating_sub(1))
        .filter(|&i| {
            "aeiou".contains(chars[i - 1]) && !"aeiou'-".contains(chars[i]) && "aeiou".contains(chars[i + 1])
        })
        .collect();
    let &i = spots.choose(rng)?;
    let mut out: String = chars[..i].iter().collect();
    out.push_str(digraph);
    out.extend(&chars[i + 1..]);
    Some(out)
}

fn build(seed: u64) -> (Vec<Concept>, Vec<Row>, Vec<(usize, usize, String, String)>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let concepts = concepts(&mut rng);
    let rescue_concepts: BTreeSet<usize> = RESCUES.iter().map(|r| r.0).collect();
    let mut protected: BTreeSet<usize> = rescue_concepts.clone();
    protected.extend(TIER_ONE);

    // Residual spread per concept, capped at four languages outside tier one.
    let mut spread: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
    // Tier-one concepts: residual in the four high-residual languages plus
    // one or two of the others.
    let mut tier_langs: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (k, &c) in TIER_ONE.iter().enumerate() {
        let mut ls = vec![1, 3, 4, 5];
        ls.push([0, 2][k % 2]);
        if k < 3 {
            ls.push([2, 0, 2][k]);
        }
        ls.sort_unstable();
        ls.dedup();
        tier_langs.insert(c, ls);
    }

    let mut rows = Vec::new();
    let mut rescue_entries = Vec::new();
    for (li, lang) in LANGUAGES.iter().enumerate() {
        let slots = slots(lang, &mut rng, &protected);
        let mut roles = vec![Role::Coded; slots.len()];
        let mut seen_concept: BTreeSet<usize> = BTreeSet::new();
        let first: Vec<bool> = slots.iter().map(|c| seen_concept.insert(*c)).collect();

        let mut rescue_pool: Vec<usize> = rescue_concepts.iter().copied().collect();
        rescue_pool.shuffle(&mut rng);
        let rescued: BTreeSet<usize> = rescue_pool.into_iter().take(lang.rescues).collect();
        for (s, c) in slots.iter().enumerate() {
            if first[s] && rescued.contains(c) {
                roles[s] = Role::Rescue;
            }
        }

        let mut residual_left = lang.residual;
        for (s, c) in slots.iter().enumerate() {
            if first[s] && tier_langs.get(c).is_some_and(|ls| ls.contains(&li)) {
                roles[s] = Role::Residual;
                spread.entry(*c).or_default().insert(li);
                residual_left -= 1;
            }
        }
        let mut order: Vec<usize> = (0..slots.len()).collect();
        order.shuffle(&mut rng);
        order.sort_by_key(|&s| spread.get(&slots[s]).map_or(0, BTreeSet::len));
        for s in order {
            if residual_left == 0 {
                break;
            }
            let c = slots[s];
            if roles[s] != Role::Coded || protected.contains(&c) {
                continue;
            }
            let e = spread.entry(c).or_default();
            if e.len() >= 4 && !e.contains(&li) {
                continue;
            }
            e.insert(li);
            roles[s] = Role::Residual;
            residual_left -= 1;
        }
        assert_eq!(residual_left, 0, "{}", lang.id);

        let mut loans: Vec<&str> =
            LOAN_WORDS.iter().filter(|(l, _)| *l == lang.id).map(|(_, w)| *w).collect();
        assert_eq!(loans.len(), lang.loans);
        let mut candidates: Vec<usize> = (0..slots.len())
            .filter(|&s| roles[s] == Role::Coded && !protected.contains(&slots[s]))
            .collect();
        candidates.shuffle(&mut rng);
        let mut loan_slots = BTreeMap::new();
        for s in candidates.into_iter().take(lang.loans) {
            roles[s] = Role::Loan;
            loan_slots.insert(s, loans.pop().unwrap());
        }

        // Language-stable choice of cognate set per concept.
        let mut used_forms: BTreeSet<String> = BTreeSet::new();
        let mut syn_count: BTreeMap<usize, usize> = BTreeMap::new();
        for (s, &c) in slots.iter().enumerate() {
            let concept = &concepts[c - 1];
            let k = syn_count.entry(c).or_insert(0);
            *k += 1;
            let mut codes = Vec::new();
            let mut flagged = false;
            let form = match roles[s] {
                Role::Coded => {
                    let set = (li * 7 + c + *k) % concept.sets.len();
                    codes.push(format!("{c}-{}", set + 1));
                    if concept.sets.len() > 1 && rng.gen_bool(0.03) {
                        codes.push(format!("{c}-{}", (set + 1) % concept.sets.len() + 1));
                    }
                    let mut f = reflex(&concept.sets[set], lang, &mut rng);
                    let mut tries = 0;
                    while used_forms.contains(&f) || forbidden(&f) || f.chars().count() < 2 {
                        f = if tries > 5 || rng.gen_bool(0.1) {
                            mainstream_root(&mut rng)
                        } else {
                            reflex(&concept.sets[set], lang, &mut rng)
                        };
                        tries += 1;
                    }
                    if rng.gen_bool(0.08) {
                        // occasional phonologically unusual but coded form
                        loop {
                            let g = residual_form(&mut rng);
                            if !used_forms.contains(&g) && !forbidden(&g) {
                                f = g;
                                break;
                            }
                        }
                    }
                    f
                }
                Role::Residual => loop {
                    let f = if rng.gen_bool(0.78) { residual_form(&mut rng) } else { mainstream_root(&mut rng) };
                    if !used_forms.contains(&f) && !forbidden(&f) {
                        break f;
                    }
                },
                Role::Loan => {
                    let w = loan_slots[&s].to_string();
                    // the third Tolaki loan is flagged in the source instead
                    if lang.id == "tolaki" && w == "kampilo" {
                        flagged = true;
                    }
                    w
                }
                Role::Rescue => {
                    let (_, root, proto) = RESCUES.iter().find(|r| r.0 == c).unwrap();
                    let mut f = reflex(root, lang, &mut rng);
                    while used_forms.contains(&f) || forbidden(&f) {
                        f = format!("{f}a");
                    }
                    rescue_entries.push((c, li, f.clone(), proto.to_string()));
                    f
                }
            };
            used_forms.insert(form.clone());
            rows.push(Row {
                id: format!("{}-{c}-{k}", lang.id),
                lang: li,
                concept: c,
                raw: form.clone(),
                form,
                codes,
                flagged,
                role: roles[s],
            });
        }
    }

    // Planted digraphs: 54 in Muna, 21 elsewhere.
    let mut planted = Vec::new();
    for (quota, muna) in [(54usize, true), (21, false)] {
        let mut idx: Vec<usize> = (0..rows.len())
            .filter(|&i| (rows[i].lang == 0) == muna)
            .filter(|&i| matches!(rows[i].role, Role::Coded | Role::Residual))
            .collect();
        idx.shuffle(&mut rng);
        let mut done = 0;
        for i in idx {
            if done == quota {
                break;
            }
            let digraphs: &[&str] = if muna { &["gh", "bh", "ng", "ny"] } else { &["ng", "ny"] };
            let d = pick(&mut rng, digraphs);
            let Some(f) = plant(&rows[i].form, d, &mut rng) else { continue };
            if rows.iter().any(|r| r.lang == rows[i].lang && r.form == f) {
                continue;
            }
            rows[i].raw = f.clone();
            rows[i].form = f;
            planted.push(rows[i].id.clone());
            done += 1;
        }
        assert_eq!(done, quota);
    }

    // Bracketed annotations on a handful of raw forms.
    let mut annotated = 0;
    for r in rows.iter_mut() {
        if annotated < 6 && r.role == Role::Coded && r.concept % 37 == 5 {
            r.raw = format!("{} ({})", r.form, concepts[r.concept - 1].gloss);
            annotated += 1;
        }
    }
    planted.sort();
    (concepts, rows, rescue_entries, planted)
}

fn write_forms(path: &Path, concepts: &[Concept], rows: &[Row], langs: &[&str]) {
    let mut w = csv::Writer::from_path(path).unwrap();
    w.write_record(["ID", "Language_ID", "Parameter_ID", "Parameter_Name", "Form", "Cognacy", "Loan"]).unwrap();
    for r in rows {
        let c = &concepts[r.concept - 1];
        w.write_record([
            r.id.as_str(),
            langs[r.lang],
            c.id.as_str(),
            c.gloss.as_str(),
            r.raw.as_str(),
            r.codes.join(",").as_str(),
            if r.flagged { "True" } else { "" },
        ])
        .unwrap();
    }
    w.flush().unwrap();
}

/// A smaller corpus of four unseen languages for expansion scoring.
fn expansion(concepts: &[Concept], seed: u64) -> Vec<Row> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let langs = [
        Language { id: "kulisusu", total: 150, residual: 40, loans: 0, rescues: 0, shifts: &[('r', 'l')], keep_final: false },
        Language { id: "moronene", total: 150, residual: 60, loans: 0, rescues: 0, shifts: &[('b', 'w')], keep_final: false },
        Language { id: "mandar", total: 150, residual: 25, loans: 0, rescues: 0, shifts: &[], keep_final: true },
        Language { id: "selayar", total: 150, residual: 35, loans: 0, rescues: 0, shifts: &[('s', 'c')], keep_final: true },
    ];
    let mut rows = Vec::new();
    for (li, lang) in langs.iter().enumerate() {
        let mut cs: Vec<usize> = (1..=210).collect();
        cs.shuffle(&mut rng);
        cs.truncate(lang.total);
        cs.sort_unstable();
        let mut used = BTreeSet::new();
        for (s, &c) in cs.iter().enumerate() {
            let residual = s % (lang.total / lang.residual) == 0;
            let concept = &concepts[c - 1];
            let (form, codes) = loop {
                let (f, codes) = if residual {
                    (residual_form(&mut rng), vec![])
                } else {
                    let set = (li + c) % concept.sets.len();
                    (reflex(&concept.sets[set], lang, &mut rng), vec![format!("{c}-{}", set + 1)])
                };
                if !forbidden(&f) && !used.contains(&f) && f.chars().count() >= 2 {
                    break (f, codes);
                }
            };
            used.insert(form.clone());
            rows.push(Row {
                id: format!("{}-{c}-1", lang.id),
                lang: li,
                concept: c,
                raw: form.clone(),
                form,
                codes,
                flagged: false,
                role: if residual { Role::Residual } else { Role::Coded },
            });
        }
    }
    rows
}

fn main() {
    let out = PathBuf::from(std::env::args().nth(1).unwrap_or_else(|| "crates/core/fixtures".into()));
    fs::create_dir_all(out.join("expansion")).unwrap();
    let (concepts, rows, rescues, planted) = build(20_240_601);
    let ids: Vec<&str> = LANGUAGES.iter().map(|l| l.id).collect();
    write_forms(&out.join("forms.csv"), &concepts, &rows, &ids);

    let mut loans = String::from("language_id,form\n");
    for (l, w) in LOAN_WORDS.iter().filter(|(_, w)| *w != "kampilo") {
        loans.push_str(&format!("{l},{w}\n"));
    }
    fs::write(out.join("loans.csv"), loans).unwrap();

    let mut resc = String::from("concept_id,language_id,form,proto_form\n");
    for (c, li, f, p) in &rescues {
        resc.push_str(&format!("{},{},{f},{p}\n", concepts[c - 1].id, ids[*li]));
    }
    fs::write(out.join("rescues.csv"), resc).unwrap();

    let mut sw: Vec<usize> = SWADESH100.to_vec();
    sw.sort_unstable();
    sw.dedup();
    assert_eq!(sw.len(), 100);
    let sw: String = sw.iter().map(|n| format!("{}\n", concepts[n - 1].id)).collect();
    fs::write(out.join("swadesh100.txt"), sw).unwrap();

    let mut dm = String::from("concept_id,domain\n");
    for (i, c) in concepts.iter().enumerate() {
        dm.push_str(&format!("{},{}\n", c.id, domain(i + 1, &c.gloss)));
    }
    fs::write(out.join("domains.csv"), dm).unwrap();

    fs::write(out.join("planted_digraphs.txt"), planted.join("\n") + "\n").unwrap();

    let exp = expansion(&concepts, 77);
    let exp_ids = ["kulisusu", "moronene", "mandar", "selayar"];
    write_forms(&out.join("expansion/forms.csv"), &concepts, &exp, &exp_ids);
    fs::write(
        out.join("expansion/groups.csv"),
        "language_id,group\nkulisusu,southeast\nmoronene,southeast\nmandar,south\nselayar,south\n",
    )
    .unwrap();
    eprintln!("wrote {} forms, {} rescues, {} planted digraphs", rows.len(), rescues.len(), planted.len());
}
