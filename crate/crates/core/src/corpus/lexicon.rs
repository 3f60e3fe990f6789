//! Word tables shared by the synthetic corpora and the rule-based generator.
//!
//! The NLI tables are split into three domains by index range: a target
//! domain (restaurants), a general domain (everyday life, used for the
//! auxiliary corpus) and a shifted domain (hotels) that shares part of the
//! target's antonym pairs.

use std::ops::Range;

pub const SENTIMENT_POSITIVE: &[&str] = &[
    "great", "excellent", "wonderful", "superb", "delightful", "brilliant", "charming",
    "moving", "gorgeous", "masterful", "engaging", "hilarious", "touching", "stunning",
    "beautiful", "clever", "witty", "enjoyable", "refreshing", "splendid", "terrific",
    "fantastic", "memorable", "powerful", "heartfelt", "uplifting", "inventive",
    "compelling", "captivating", "graceful", "sincere", "vivid", "marvelous", "tender",
    "thrilling", "riveting", "luminous", "poignant", "dazzling", "elegant",
];

pub const SENTIMENT_NEGATIVE: &[&str] = &[
    "awful", "terrible", "boring", "dull", "tedious", "clumsy", "bland", "dreadful",
    "lifeless", "pointless", "awkward", "messy", "shallow", "sloppy", "stale", "tiresome",
    "unfunny", "flat", "forgettable", "incoherent", "lame", "mediocre", "painful",
    "predictable", "silly", "tacky", "weak", "worthless", "annoying", "bloated",
    "confusing", "cheap", "hollow", "dreary", "joyless", "laughable", "listless",
    "muddled", "plodding", "wooden",
];

/// Topic words with no class signal.
pub const FILLER: &[&str] = &[
    "the", "a", "an", "this", "that", "film", "movie", "story", "plot", "cast", "actor",
    "actress", "director", "script", "scene", "scenes", "ending", "music", "score", "camera",
    "screen", "audience", "character", "characters", "dialogue", "drama", "comedy", "sequel",
    "series", "studio", "premiere", "theater", "ticket", "popcorn", "seat", "hour", "minutes",
    "runtime", "budget", "production", "editing", "lighting", "costume", "costumes", "set",
    "location", "city", "village", "family", "friend", "friends", "mother", "father", "son",
    "daughter", "brother", "sister", "teacher", "student", "doctor", "soldier", "king",
    "queen", "journey", "war", "love", "romance", "mystery", "crime", "detective",
    "monster", "robot", "alien", "ghost", "dragon", "hero", "villain", "sidekick", "chase",
    "fight", "dance", "song", "trailer", "poster", "review", "critic", "festival", "award",
    "season", "episode", "chapter", "book", "novel", "adaptation", "remake", "version",
    "is", "was", "are", "were", "has", "had", "with", "about", "from", "into", "over",
    "after", "before", "during", "through", "and", "but", "or", "of", "in", "on", "at",
    "for", "to", "by", "as", "it", "its", "their", "his", "her", "they", "we", "i", "you",
];

pub const NEGATIONS: &[&str] = &["not", "never"];

/// Connectives that introduce an appended, unsupported clause.
pub const CONNECTIVES: &[&str] = &["because", "since", "although", "after", "so"];

/// Antonym pairs. Indices `0..24` belong to the target domain, `24..48` to the
/// general domain and `48..60` to the shifted domain.
pub const ANTONYMS: &[(&str, &str)] = &[
    // target (restaurant)
    ("hot", "cold"),
    ("fresh", "stale"),
    ("spicy", "mild"),
    ("salty", "bland"),
    ("crisp", "soggy"),
    ("tender", "tough"),
    ("sweet", "sour"),
    ("friendly", "rude"),
    ("fast", "slow"),
    ("cheap", "pricey"),
    ("clean", "dirty"),
    ("quiet", "noisy"),
    ("generous", "stingy"),
    ("juicy", "dry"),
    ("warm", "chilly"),
    ("attentive", "neglectful"),
    ("cozy", "cramped"),
    ("ripe", "unripe"),
    ("thick", "thin"),
    ("rich", "watery"),
    ("polite", "impolite"),
    ("full", "empty"),
    ("crowded", "deserted"),
    ("fancy", "plain"),
    // general
    ("big", "small"),
    ("happy", "sad"),
    ("open", "closed"),
    ("early", "late"),
    ("bright", "dark"),
    ("strong", "weak"),
    ("soft", "hard"),
    ("new", "old"),
    ("safe", "dangerous"),
    ("easy", "difficult"),
    ("wet", "parched"),
    ("heavy", "light"),
    ("high", "low"),
    ("long", "short"),
    ("wide", "narrow"),
    ("deep", "shallow"),
    ("honest", "dishonest"),
    ("smooth", "rough"),
    ("brave", "afraid"),
    ("tidy", "messy"),
    ("modern", "ancient"),
    ("simple", "complex"),
    ("careful", "careless"),
    ("healthy", "sick"),
    // shifted (hotel)
    ("spacious", "tiny"),
    ("comfortable", "uncomfortable"),
    ("luxurious", "shabby"),
    ("sunny", "gloomy"),
    ("central", "remote"),
    ("modernized", "outdated"),
    ("welcoming", "hostile"),
    ("secure", "unsafe"),
    ("airy", "stuffy"),
    ("reliable", "unreliable"),
    ("elegant", "tacky"),
    ("peaceful", "hectic"),
];

/// Noun synonym pairs, grouped by domain like [`ANTONYMS`] (`0..10` target,
/// `10..20` general, `20..30` shifted).
pub const SYNONYMS: &[(&str, &str)] = &[
    ("waiter", "server"),
    ("meal", "dinner"),
    ("chef", "cook"),
    ("dish", "plate"),
    ("restaurant", "eatery"),
    ("soup", "broth"),
    ("dessert", "sweets"),
    ("bill", "check"),
    ("menu", "card"),
    ("steak", "beef"),
    ("car", "automobile"),
    ("house", "home"),
    ("child", "kid"),
    ("road", "street"),
    ("shop", "store"),
    ("job", "work"),
    ("doctor", "physician"),
    ("film", "movie"),
    ("garden", "yard"),
    ("phone", "telephone"),
    ("hotel", "inn"),
    ("room", "suite"),
    ("bed", "mattress"),
    ("lobby", "foyer"),
    ("receptionist", "clerk"),
    ("view", "panorama"),
    ("pool", "lido"),
    ("breakfast", "buffet"),
    ("balcony", "terrace"),
    ("staff", "personnel"),
];

/// Clause fragments that add unsupported information, grouped by domain
/// (`0..15` target, `15..30` general, `30..45` shifted).
pub const FRAGMENTS: &[&str] = &[
    "the owner was celebrating a birthday",
    "the kitchen hired a new pastry chef",
    "a jazz trio played near the bar",
    "the wine list changed last month",
    "the patio was reserved for a wedding",
    "a critic visited on opening night",
    "the bakery next door supplies bread",
    "the chef trained in lyon",
    "the herbs come from a rooftop farm",
    "a famous actor dined there once",
    "the tables were made from reclaimed oak",
    "the cocktails feature local gin",
    "the dumplings are folded by hand",
    "the recipes belong to a grandmother",
    "the espresso machine was imported",
    "the neighbors were moving away",
    "a storm was expected that evening",
    "the mayor announced new taxes",
    "the train schedule had changed",
    "the school organized a science fair",
    "the library extended its hours",
    "a marathon closed the main bridge",
    "the factory added a night shift",
    "her cousin bought a sailboat",
    "the museum opened a new wing",
    "the council planted more trees",
    "a parade was planned for sunday",
    "the bakery raised its prices",
    "his uncle repaired old clocks",
    "the stadium installed new lights",
    "the resort hosted a tennis tournament",
    "the spa offers volcanic stone massages",
    "a ferry connects the island twice daily",
    "the concierge speaks four languages",
    "the rooftop bar overlooks the harbor",
    "the building was once a monastery",
    "a conference filled the ballroom",
    "the gardens hold rare orchids",
    "the elevator was replaced in spring",
    "a shuttle runs to the airport hourly",
    "the minibar stocks artisanal chocolate",
    "the chandeliers came from venice",
    "guests receive a welcome cocktail",
    "the ski lift is a short walk away",
    "the carpets were woven in persia",
];

/// Domain nouns used as premise subjects.
pub const NOUNS: &[&str] = &[
    // target
    "soup", "waiter", "bread", "salad", "steak", "coffee", "dessert", "chef", "menu",
    "pasta", "dish", "meal", "restaurant", "bill", "sauce", "table", "kitchen", "fries",
    "pizza", "curry",
    // general
    "car", "house", "child", "road", "shop", "job", "doctor", "film", "garden", "phone",
    "bus", "office", "weather", "street", "park", "neighbor", "market", "book", "school",
    "bridge",
    // shifted
    "hotel", "room", "bed", "lobby", "receptionist", "view", "pool", "breakfast",
    "balcony", "staff", "corridor", "bathroom", "towel", "elevator", "suite", "gym",
    "parking", "shower", "sauna", "terrace",
];

/// Which slice of the NLI tables a domain draws from.
#[derive(Debug, Clone)]
pub struct DomainTables {
    pub antonyms: Vec<Range<usize>>,
    pub synonyms: Range<usize>,
    pub fragments: Range<usize>,
    pub nouns: Range<usize>,
}

impl DomainTables {
    pub fn antonym_pairs(&self) -> impl Iterator<Item = (&'static str, &'static str)> + '_ {
        self.antonyms.iter().flat_map(|r| ANTONYMS[r.clone()].iter().copied())
    }
}

pub fn target_domain() -> DomainTables {
    DomainTables {
        antonyms: std::iter::once(0..24).collect(),
        synonyms: 0..10,
        fragments: 0..15,
        nouns: 0..20,
    }
}

/// The auxiliary corpus covers the general domain plus the first half of
/// the target antonyms, so an auxiliary classifier transfers only partially.
pub fn general_domain() -> DomainTables {
    DomainTables {
        antonyms: vec![24..48, 0..12],
        synonyms: 10..20,
        fragments: 15..30,
        nouns: 20..40,
    }
}

/// Hotel reviews: own vocabulary plus the second half of the target antonyms.
pub fn shifted_domain() -> DomainTables {
    DomainTables {
        antonyms: vec![48..60, 12..24],
        synonyms: 20..30,
        fragments: 30..45,
        nouns: 40..60,
    }
}

const ONSETS: &[&str] = &[
    "b", "d", "f", "g", "k", "l", "m", "n", "p", "r", "s", "t", "v", "z", "sh",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u"];

/// Deterministic pronounceable pseudo-word; injective in `index`.
pub fn pseudo_word(index: usize) -> String {
    let base = ONSETS.len() * VOWELS.len();
    let mut n = index;
    let mut word = String::new();
    for _ in 0..3 {
        let syl = n % base;
        word.push_str(ONSETS[syl / VOWELS.len()]);
        word.push_str(VOWELS[syl % VOWELS.len()]);
        n /= base;
    }
    debug_assert!(n == 0 || index >= base.pow(3));
    word
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn antonym_words_are_unique() {
        let mut seen = HashSet::new();
        for (a, b) in ANTONYMS {
            assert!(seen.insert(*a), "duplicate {a}");
            assert!(seen.insert(*b), "duplicate {b}");
        }
        assert_eq!(ANTONYMS.len(), 60);
        assert_eq!(SYNONYMS.len(), 30);
        assert_eq!(FRAGMENTS.len(), 45);
        assert_eq!(NOUNS.len(), 60);
    }

    #[test]
    fn sentiment_lexicons_are_disjoint() {
        let pos: HashSet<_> = SENTIMENT_POSITIVE.iter().collect();
        assert!(SENTIMENT_NEGATIVE.iter().all(|w| !pos.contains(w)));
        assert!(FILLER.iter().all(|w| !pos.contains(w) && !SENTIMENT_NEGATIVE.contains(w)));
    }

    #[test]
    fn pseudo_words_are_injective() {
        let words: HashSet<String> = (0..5000).map(pseudo_word).collect();
        assert_eq!(words.len(), 5000);
    }
}
