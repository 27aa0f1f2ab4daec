//! Deterministic generator for the two-grammar role-labeling benchmark:
//! six sentence structures, 20 grammatical roles, 147 words.
//!
//! Grammar A (animals) and Grammar B (vehicles) share all syntax, determiners,
//! and function words; their content words (nouns, verbs, adjectives, adverbs)
//! are disjoint. Position alone cannot determine a role: position 0 is
//! `det_agent` in active sentences and `det_patient` in passives.

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

// ── role inventory ───────────────────────────────────────────────────

/// The 20 grammatical roles. The five `*_rel` / relativizer roles sit inside
/// a relative clause and form the "deep" subset.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Role {
    DetAgent,
    AdjAgent,
    NounAgent,
    Verb,
    DetPatient,
    AdjPatient,
    NounPatient,
    AuxPassive,
    PrepBy,
    DetRecipient,
    NounRecipient,
    PrepTo,
    RelPronoun,
    DetRel,
    NounRel,
    VerbRel,
    AdjRel,
    Adverb,
    DetSubject,
    NounSubject,
}

pub const ROLE_COUNT: usize = 20;

impl Role {
    pub const ALL: [Role; ROLE_COUNT] = [
        Role::DetAgent,
        Role::AdjAgent,
        Role::NounAgent,
        Role::Verb,
        Role::DetPatient,
        Role::AdjPatient,
        Role::NounPatient,
        Role::AuxPassive,
        Role::PrepBy,
        Role::DetRecipient,
        Role::NounRecipient,
        Role::PrepTo,
        Role::RelPronoun,
        Role::DetRel,
        Role::NounRel,
        Role::VerbRel,
        Role::AdjRel,
        Role::Adverb,
        Role::DetSubject,
        Role::NounSubject,
    ];

    pub fn index(self) -> usize {
        Role::ALL.iter().position(|&r| r == self).unwrap()
    }

    pub fn name(self) -> &'static str {
        match self {
            Role::DetAgent => "det_agent",
            Role::AdjAgent => "adj_agent",
            Role::NounAgent => "noun_agent",
            Role::Verb => "verb",
            Role::DetPatient => "det_patient",
            Role::AdjPatient => "adj_patient",
            Role::NounPatient => "noun_patient",
            Role::AuxPassive => "aux_passive",
            Role::PrepBy => "prep_by",
            Role::DetRecipient => "det_recipient",
            Role::NounRecipient => "noun_recipient",
            Role::PrepTo => "prep_to",
            Role::RelPronoun => "rel_pronoun",
            Role::DetRel => "det_rel",
            Role::NounRel => "noun_rel",
            Role::VerbRel => "verb_rel",
            Role::AdjRel => "adj_rel",
            Role::Adverb => "adverb",
            Role::DetSubject => "det_subject",
            Role::NounSubject => "noun_subject",
        }
    }

    pub fn from_name(name: &str) -> Option<Role> {
        Role::ALL.iter().copied().find(|r| r.name() == name)
    }

    /// Roles inside a relative clause — the "deep" metric subset.
    pub fn is_deep(self) -> bool {
        matches!(
            self,
            Role::RelPronoun | Role::DetRel | Role::NounRel | Role::VerbRel | Role::AdjRel
        )
    }

    fn is_determiner(self) -> bool {
        matches!(
            self,
            Role::DetAgent | Role::DetPatient | Role::DetRecipient | Role::DetRel | Role::DetSubject
        )
    }

    fn is_adjective(self) -> bool {
        matches!(self, Role::AdjAgent | Role::AdjPatient | Role::AdjRel)
    }

    fn is_noun(self) -> bool {
        matches!(
            self,
            Role::NounAgent
                | Role::NounPatient
                | Role::NounRecipient
                | Role::NounRel
                | Role::NounSubject
        )
    }
}

impl fmt::Display for Role {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

// ── lexicon ──────────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Category {
    Determiner,
    Auxiliary,
    Relativizer,
    PrepBy,
    PrepTo,
    Noun,
    Verb,
    Adjective,
    Adverb,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Variant {
    A,
    B,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::A => "A",
            Variant::B => "B",
        }
    }

    pub fn from_name(s: &str) -> Option<Variant> {
        match s {
            "A" => Some(Variant::A),
            "B" => Some(Variant::B),
            _ => None,
        }
    }
}

// Function words, shared between the variants: 2 determiners + 6 others.
const DETERMINERS: [&str; 2] = ["the", "a"];
const AUXILIARIES: [&str; 2] = ["is", "was"];
const RELATIVIZERS: [&str; 2] = ["that", "which"];
const PREP_BY: [&str; 1] = ["by"];
const PREP_TO: [&str; 1] = ["to"];

// Content words, disjoint between the variants: 70 + 69 = 139.
const A_NOUNS: [&str; 24] = [
    "cat", "dog", "bird", "fox", "wolf", "bear", "mouse", "rabbit", "horse", "cow", "pig",
    "sheep", "goat", "duck", "frog", "snake", "lion", "tiger", "deer", "owl", "bat", "fish",
    "hen", "crab",
];
const A_VERBS: [&str; 24] = [
    "chases", "sees", "bites", "follows", "finds", "watches", "hears", "greets", "carries",
    "pushes", "pulls", "grabs", "lifts", "touches", "guards", "feeds", "licks", "nudges",
    "sniffs", "fetches", "drops", "shoves", "spots", "hugs",
];
const A_ADJECTIVES: [&str; 14] = [
    "big", "small", "fast", "slow", "old", "young", "loud", "quiet", "happy", "angry",
    "clever", "lazy", "brave", "shy",
];
const A_ADVERBS: [&str; 8] = [
    "quickly", "slowly", "quietly", "loudly", "happily", "angrily", "bravely", "calmly",
];

const B_NOUNS: [&str; 24] = [
    "car", "bus", "bike", "truck", "train", "boat", "plane", "tram", "van", "taxi", "scooter",
    "ship", "jeep", "rocket", "sled", "ferry", "wagon", "cart", "canoe", "yacht", "glider",
    "subway", "trolley", "barge",
];
const B_VERBS: [&str; 23] = [
    "overtakes", "trails", "rams", "blocks", "signals", "approaches", "avoids", "escorts",
    "bumps", "shadows", "leads", "meets", "joins", "races", "circles", "flanks", "tails",
    "intercepts", "parks", "hauls", "loads", "unloads", "nears",
];
const B_ADJECTIVES: [&str; 14] = [
    "red", "blue", "green", "shiny", "rusty", "clean", "dirty", "heavy", "light", "narrow",
    "wide", "broken", "silent", "bright",
];
const B_ADVERBS: [&str; 8] = [
    "smoothly", "roughly", "steadily", "swiftly", "sharply", "gently", "abruptly", "evenly",
];

/// The shared 147-word vocabulary: function words first, then A content,
/// then B content, in declaration order. Word ids are stable across variants
/// so both grammars one-hot into the same space.
#[derive(Clone, Debug)]
pub struct Vocabulary {
    words: Vec<&'static str>,
    index: HashMap<&'static str, u16>,
}

impl Vocabulary {
    pub fn full() -> Vocabulary {
        let mut words: Vec<&'static str> = Vec::new();
        words.extend(DETERMINERS);
        words.extend(AUXILIARIES);
        words.extend(RELATIVIZERS);
        words.extend(PREP_BY);
        words.extend(PREP_TO);
        words.extend(A_NOUNS);
        words.extend(A_VERBS);
        words.extend(A_ADJECTIVES);
        words.extend(A_ADVERBS);
        words.extend(B_NOUNS);
        words.extend(B_VERBS);
        words.extend(B_ADJECTIVES);
        words.extend(B_ADVERBS);
        let index = words
            .iter()
            .enumerate()
            .map(|(i, &w)| (w, i as u16))
            .collect();
        Vocabulary { words, index }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn word(&self, id: u16) -> &'static str {
        self.words[id as usize]
    }

    pub fn id(&self, word: &str) -> Option<u16> {
        self.index.get(word).copied()
    }
}

// ── templates ────────────────────────────────────────────────────────

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Structure {
    Transitive,
    Passive,
    Ditransitive,
    RelativeClause,
    Intransitive,
    Adverbial,
}

impl Structure {
    pub const ALL: [Structure; 6] = [
        Structure::Transitive,
        Structure::Passive,
        Structure::Ditransitive,
        Structure::RelativeClause,
        Structure::Intransitive,
        Structure::Adverbial,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Structure::Transitive => "transitive",
            Structure::Passive => "passive",
            Structure::Ditransitive => "ditransitive",
            Structure::RelativeClause => "relative_clause",
            Structure::Intransitive => "intransitive",
            Structure::Adverbial => "adverbial",
        }
    }

    /// Role sequences identify the structure uniquely, so serialized corpora
    /// need not store it.
    pub fn infer(roles: &[Role]) -> Structure {
        if roles.contains(&Role::AuxPassive) {
            Structure::Passive
        } else if roles.contains(&Role::RelPronoun) {
            Structure::RelativeClause
        } else if roles.contains(&Role::PrepTo) {
            Structure::Ditransitive
        } else if roles.contains(&Role::Adverb) {
            Structure::Adverbial
        } else if roles.contains(&Role::DetSubject) {
            Structure::Intransitive
        } else {
            Structure::Transitive
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Slot {
    pub category: Category,
    pub role: Role,
    pub optional: bool,
}

const fn req(category: Category, role: Role) -> Slot {
    Slot {
        category,
        role,
        optional: false,
    }
}

const fn opt(category: Category, role: Role) -> Slot {
    Slot {
        category,
        role,
        optional: true,
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SentenceTemplate {
    pub structure: Structure,
    pub slots: Vec<Slot>,
}

impl SentenceTemplate {
    pub fn optional_slots(&self) -> Vec<usize> {
        self.slots
            .iter()
            .enumerate()
            .filter(|(_, s)| s.optional)
            .map(|(i, _)| i)
            .collect()
    }

    /// Labeling legality: every determiner role is followed by its noun role
    /// with only adjective roles in between.
    pub fn validate(&self) -> Result<()> {
        if self.slots.len() < 2 {
            return Err(Error::invariant("template must have ≥ 2 slots"));
        }
        for (i, slot) in self.slots.iter().enumerate() {
            if slot.role.is_determiner() {
                let mut j = i + 1;
                while j < self.slots.len() && self.slots[j].role.is_adjective() {
                    j += 1;
                }
                if j >= self.slots.len() || !self.slots[j].role.is_noun() {
                    return Err(Error::invariant(format!(
                        "determiner at slot {i} of {:?} is not followed by a noun",
                        self.structure
                    )));
                }
            }
        }
        Ok(())
    }
}

fn templates() -> Vec<SentenceTemplate> {
    use Category as C;
    use Role as R;
    vec![
        // "the big cat chases the small dog"
        SentenceTemplate {
            structure: Structure::Transitive,
            slots: vec![
                req(C::Determiner, R::DetAgent),
                opt(C::Adjective, R::AdjAgent),
                req(C::Noun, R::NounAgent),
                req(C::Verb, R::Verb),
                req(C::Determiner, R::DetPatient),
                opt(C::Adjective, R::AdjPatient),
                req(C::Noun, R::NounPatient),
            ],
        },
        // "the dog is chases by the cat" — one surface form per verb, so the
        // participle is not inflected; position 0 carries det_patient.
        SentenceTemplate {
            structure: Structure::Passive,
            slots: vec![
                req(C::Determiner, R::DetPatient),
                opt(C::Adjective, R::AdjPatient),
                req(C::Noun, R::NounPatient),
                req(C::Auxiliary, R::AuxPassive),
                req(C::Verb, R::Verb),
                req(C::PrepBy, R::PrepBy),
                req(C::Determiner, R::DetAgent),
                opt(C::Adjective, R::AdjAgent),
                req(C::Noun, R::NounAgent),
            ],
        },
        // prepositional dative: "the cat carries the fish to the dog"
        SentenceTemplate {
            structure: Structure::Ditransitive,
            slots: vec![
                req(C::Determiner, R::DetAgent),
                opt(C::Adjective, R::AdjAgent),
                req(C::Noun, R::NounAgent),
                req(C::Verb, R::Verb),
                req(C::Determiner, R::DetPatient),
                opt(C::Adjective, R::AdjPatient),
                req(C::Noun, R::NounPatient),
                req(C::PrepTo, R::PrepTo),
                req(C::Determiner, R::DetRecipient),
                req(C::Noun, R::NounRecipient),
            ],
        },
        // "the cat that chases the dog sees the bird"
        SentenceTemplate {
            structure: Structure::RelativeClause,
            slots: vec![
                req(C::Determiner, R::DetAgent),
                opt(C::Adjective, R::AdjAgent),
                req(C::Noun, R::NounAgent),
                req(C::Relativizer, R::RelPronoun),
                req(C::Verb, R::VerbRel),
                req(C::Determiner, R::DetRel),
                opt(C::Adjective, R::AdjRel),
                req(C::Noun, R::NounRel),
                req(C::Verb, R::Verb),
                req(C::Determiner, R::DetPatient),
                opt(C::Adjective, R::AdjPatient),
                req(C::Noun, R::NounPatient),
            ],
        },
        // "the dog runs" (verbs share one surface list)
        SentenceTemplate {
            structure: Structure::Intransitive,
            slots: vec![
                req(C::Determiner, R::DetSubject),
                req(C::Noun, R::NounSubject),
                req(C::Verb, R::Verb),
            ],
        },
        // "the dog runs quickly"
        SentenceTemplate {
            structure: Structure::Adverbial,
            slots: vec![
                req(C::Determiner, R::DetSubject),
                req(C::Noun, R::NounSubject),
                req(C::Verb, R::Verb),
                req(C::Adverb, R::Adverb),
            ],
        },
    ]
}

// ── grammar ──────────────────────────────────────────────────────────

#[derive(Clone, Debug)]
pub struct Grammar {
    pub variant: Variant,
    pub lexicon: BTreeMap<Category, Vec<&'static str>>,
    pub templates: Vec<SentenceTemplate>,
    pub role_set: [Role; ROLE_COUNT],
    seed: u64,
}

/// Builds the grammar for a variant. The inventory is fixed; the seed only
/// namespaces downstream sampling, so the result is trivially deterministic.
pub fn build_grammar(variant: Variant, seed: u64) -> Grammar {
    let mut lexicon: BTreeMap<Category, Vec<&'static str>> = BTreeMap::new();
    lexicon.insert(Category::Determiner, DETERMINERS.to_vec());
    lexicon.insert(Category::Auxiliary, AUXILIARIES.to_vec());
    lexicon.insert(Category::Relativizer, RELATIVIZERS.to_vec());
    lexicon.insert(Category::PrepBy, PREP_BY.to_vec());
    lexicon.insert(Category::PrepTo, PREP_TO.to_vec());
    match variant {
        Variant::A => {
            lexicon.insert(Category::Noun, A_NOUNS.to_vec());
            lexicon.insert(Category::Verb, A_VERBS.to_vec());
            lexicon.insert(Category::Adjective, A_ADJECTIVES.to_vec());
            lexicon.insert(Category::Adverb, A_ADVERBS.to_vec());
        }
        Variant::B => {
            lexicon.insert(Category::Noun, B_NOUNS.to_vec());
            lexicon.insert(Category::Verb, B_VERBS.to_vec());
            lexicon.insert(Category::Adjective, B_ADJECTIVES.to_vec());
            lexicon.insert(Category::Adverb, B_ADVERBS.to_vec());
        }
    }
    Grammar {
        variant,
        lexicon,
        templates: templates(),
        role_set: Role::ALL,
        seed,
    }
}

impl Grammar {
    /// Words reachable from this variant: shared function words + own content.
    pub fn word_count(&self) -> usize {
        self.lexicon.values().map(Vec::len).sum()
    }

    pub fn content_words(&self) -> Vec<&'static str> {
        [Category::Noun, Category::Verb, Category::Adjective, Category::Adverb]
            .iter()
            .flat_map(|c| self.lexicon[c].iter().copied())
            .collect()
    }
}

// ── sentences ────────────────────────────────────────────────────────

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LabeledSentence {
    pub tokens: Vec<String>,
    pub roles: Vec<Role>,
    pub structure: Structure,
    pub grammar: Variant,
}

impl LabeledSentence {
    /// Identity string used for split-disjointness checks.
    pub fn identity(&self) -> String {
        self.tokens.join(" ")
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}

fn sample_sentence<R: Rng>(grammar: &Grammar, rng: &mut R) -> LabeledSentence {
    let template = &grammar.templates[rng.random_range(0..grammar.templates.len())];
    let mut tokens = Vec::with_capacity(template.slots.len());
    let mut roles = Vec::with_capacity(template.slots.len());
    for slot in &template.slots {
        // Draw the inclusion coin before the word so the stream stays aligned.
        if slot.optional && !rng.random_bool(0.5) {
            continue;
        }
        let words = &grammar.lexicon[&slot.category];
        tokens.push(words[rng.random_range(0..words.len())].to_string());
        roles.push(slot.role);
    }
    LabeledSentence {
        tokens,
        roles,
        structure: template.structure,
        grammar: grammar.variant,
    }
}

/// Deterministic corpus sample: uniform over the six templates, adjectives
/// included with probability 1/2 per noun phrase, words uniform per category.
pub fn generate_dataset(grammar: &Grammar, n_sentences: usize, seed: u64) -> Vec<LabeledSentence> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ grammar.seed.rotate_left(17));
    (0..n_sentences).map(|_| sample_sentence(grammar, &mut rng)).collect()
}

#[derive(Clone, Debug)]
pub struct DatasetSplit {
    pub train: Vec<LabeledSentence>,
    pub test_within: Vec<LabeledSentence>,
    pub test_transfer: Vec<LabeledSentence>,
    pub seed: u64,
}

pub const TRAIN_SENTENCES: usize = 5000;
pub const TEST_SENTENCES: usize = 3000;

/// 5000 train (A), 3000 within-test (A, sentence identities disjoint from
/// train), 3000 transfer-test (B).
pub fn make_splits(seed: u64) -> DatasetSplit {
    let grammar_a = build_grammar(Variant::A, seed);
    let grammar_b = build_grammar(Variant::B, seed);
    let train = generate_dataset(&grammar_a, TRAIN_SENTENCES, seed);

    let train_ids: std::collections::HashSet<String> =
        train.iter().map(|s| s.identity()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_add(0x5eed_0001));
    let mut test_within = Vec::with_capacity(TEST_SENTENCES);
    while test_within.len() < TEST_SENTENCES {
        let s = sample_sentence(&grammar_a, &mut rng);
        if !train_ids.contains(&s.identity()) {
            test_within.push(s);
        }
    }

    let test_transfer = generate_dataset(&grammar_b, TEST_SENTENCES, seed.wrapping_add(2));
    DatasetSplit {
        train,
        test_within,
        test_transfer,
        seed,
    }
}

// ── serialization ────────────────────────────────────────────────────

/// One sentence per line as `token/ROLE` pairs separated by spaces.
pub fn write_corpus(path: &Path, sentences: &[LabeledSentence]) -> Result<()> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    for s in sentences {
        let mut first = true;
        for (tok, role) in s.tokens.iter().zip(&s.roles) {
            if !first {
                out.write_all(b" ")?;
            }
            write!(out, "{}/{}", tok, role.name().to_uppercase())?;
            first = false;
        }
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

/// Sidecar metadata as flat key=value lines.
pub fn write_corpus_meta(
    path: &Path,
    variant: Variant,
    seed: u64,
    sentences: &[LabeledSentence],
) -> Result<()> {
    let tokens: usize = sentences.iter().map(|s| s.len()).sum();
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "variant={}", variant.name())?;
    writeln!(out, "seed={seed}")?;
    writeln!(out, "sentences={}", sentences.len())?;
    writeln!(out, "tokens={tokens}")?;
    out.flush()?;
    Ok(())
}

pub fn read_corpus(path: &Path, variant: Variant) -> Result<Vec<LabeledSentence>> {
    let file = std::fs::File::open(path)?;
    let reader = std::io::BufReader::new(file);
    let mut sentences = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let mut tokens = Vec::new();
        let mut roles = Vec::new();
        for pair in line.split_whitespace() {
            let (tok, role_name) = pair.rsplit_once('/').ok_or_else(|| Error::Format {
                path: path.display().to_string(),
                msg: format!("line {}: token without /ROLE: {pair}", lineno + 1),
            })?;
            let role =
                Role::from_name(&role_name.to_lowercase()).ok_or_else(|| Error::Format {
                    path: path.display().to_string(),
                    msg: format!("line {}: unknown role {role_name}", lineno + 1),
                })?;
            tokens.push(tok.to_string());
            roles.push(role);
        }
        let structure = Structure::infer(&roles);
        sentences.push(LabeledSentence {
            tokens,
            roles,
            structure,
            grammar: variant,
        });
    }
    Ok(sentences)
}

pub fn read_corpus_meta(path: &Path) -> Result<BTreeMap<String, String>> {
    let content = std::fs::read_to_string(path)?;
    let mut map = BTreeMap::new();
    for line in content.lines() {
        if let Some((k, v)) = line.split_once('=') {
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
    }
    Ok(map)
}
