//! Prompt catalog. Few-shot turns are stored verbatim; only the final user
//! turn carries `{{slot}}` placeholders.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GatewayError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Role {
    System,
    User,
    Assistant,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Message {
    pub role: Role,
    pub content: String,
}

#[derive(Debug, Clone)]
pub struct PromptTemplate {
    pub name: &'static str,
    pub system_message: &'static str,
    pub few_shot_turns: Vec<(Role, &'static str)>,
    pub user_template: &'static str,
    pub placeholders: Vec<String>,
    pub max_tokens: u32,
}

impl PromptTemplate {
    fn new(
        name: &'static str,
        system_message: &'static str,
        shots: &[(&'static str, &'static str)],
        user_template: &'static str,
        max_tokens: u32,
    ) -> Self {
        let few_shot_turns = shots
            .iter()
            .flat_map(|(u, a)| [(Role::User, *u), (Role::Assistant, *a)])
            .collect();
        PromptTemplate {
            name,
            system_message,
            few_shot_turns,
            user_template,
            placeholders: placeholders_in(user_template),
            max_tokens,
        }
    }

    pub fn render(&self, slots: &BTreeMap<String, String>) -> Result<Vec<Message>, GatewayError> {
        let user = substitute(self.user_template, slots).map_err(|slot| {
            GatewayError::UnboundPlaceholder {
                template: self.name.to_string(),
                slot,
            }
        })?;
        let mut out = Vec::with_capacity(self.few_shot_turns.len() + 2);
        if !self.system_message.is_empty() {
            out.push(Message {
                role: Role::System,
                content: self.system_message.to_string(),
            });
        }
        out.extend(self.few_shot_turns.iter().map(|(role, text)| Message {
            role: *role,
            content: text.to_string(),
        }));
        out.push(Message {
            role: Role::User,
            content: user,
        });
        Ok(out)
    }
}

/// Names of the `{{slot}}` placeholders in order of first appearance.
pub fn placeholders_in(template: &str) -> Vec<String> {
    let mut out: Vec<String> = Vec::new();
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else { break };
        let name = after[..end].trim().to_string();
        if !out.contains(&name) {
            out.push(name);
        }
        rest = &after[end + 2..];
    }
    out
}

/// Single-pass substitution, so slot values are never re-scanned.
fn substitute(template: &str, slots: &BTreeMap<String, String>) -> Result<String, String> {
    let mut out = String::with_capacity(template.len());
    let mut rest = template;
    while let Some(start) = rest.find("{{") {
        let after = &rest[start + 2..];
        let Some(end) = after.find("}}") else { break };
        out.push_str(&rest[..start]);
        let name = after[..end].trim();
        out.push_str(slots.get(name).ok_or_else(|| name.to_string())?);
        rest = &after[end + 2..];
    }
    out.push_str(rest);
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct Catalog {
    templates: BTreeMap<&'static str, PromptTemplate>,
}

impl Default for Catalog {
    fn default() -> Self {
        Catalog::standard()
    }
}

impl Catalog {
    pub fn standard() -> Self {
        let templates = [
            PromptTemplate::new(CONCEPTUALIZE, CONCEPTUALIZE_SYSTEM, CONCEPTUALIZE_SHOTS, "{{question}}", 512),
            PromptTemplate::new(COT, COT_SYSTEM, COT_SHOTS, "{{question}}", 512),
            PromptTemplate::new(ASK_TYPED, ASK_SYSTEM, ASK_SHOTS, "{{query}} ({{kind}})", 512),
            PromptTemplate::new(
                ENTITIES,
                ENTITIES_SYSTEM,
                ENTITIES_SHOTS,
                "Question: {{question}} Entity: {{entity}} Example: {{example}}",
                512,
            ),
            PromptTemplate::new(
                STATEMENTS,
                STATEMENTS_SYSTEM,
                STATEMENTS_SHOTS,
                "Statement: {{statement}} Entity: {{entities}}",
                512,
            ),
            PromptTemplate::new(
                REFINE,
                REFINE_SYSTEM,
                REFINE_SHOTS,
                "Original Question: {{question}} Program the person wrote:\n{{program}}\n{{failed_cases}}",
                1024,
            ),
            PromptTemplate::new(
                PROGRAM,
                PROGRAM_SYSTEM,
                PROGRAM_SHOTS,
                "{{question}} Multiple Choices: A) yes B) no",
                1024,
            ),
            PromptTemplate::new(DECLARATIVIZE, DECLARATIVIZE_SYSTEM, DECLARATIVIZE_SHOTS, "{{question}}", 512),
            PromptTemplate::new(
                MCQ_TO_BINARY,
                MCQ_SYSTEM,
                MCQ_SHOTS,
                "Question: {{question}} Answer: {{answer}}",
                512,
            ),
        ];
        Catalog {
            templates: templates.into_iter().map(|t| (t.name, t)).collect(),
        }
    }

    pub fn get(&self, name: &str) -> Result<&PromptTemplate, GatewayError> {
        self.templates
            .get(name)
            .ok_or_else(|| GatewayError::UnknownTemplate(name.to_string()))
    }

    pub fn insert(&mut self, template: PromptTemplate) {
        self.templates.insert(template.name, template);
    }

    pub fn names(&self) -> impl Iterator<Item = &'static str> + '_ {
        self.templates.keys().copied()
    }

    pub fn render(&self, name: &str, slots: &BTreeMap<String, String>) -> Result<Vec<Message>, GatewayError> {
        self.get(name)?.render(slots)
    }
}

pub const CONCEPTUALIZE: &str = "conceptualize";
pub const COT: &str = "cot";
pub const ASK_TYPED: &str = "ask_typed";
pub const ENTITIES: &str = "entities";
pub const STATEMENTS: &str = "statements";
pub const REFINE: &str = "refine";
pub const PROGRAM: &str = "program";
pub const DECLARATIVIZE: &str = "declarativize";
pub const MCQ_TO_BINARY: &str = "mcq_to_binary";

const CONCEPTUALIZE_SYSTEM: &str = "Identify named entities, special nouns, or numerical values in the given question, then replace some of them with appropriate semantic types, so that the resulting abstract question is still answerable with the same general solution as the original question. Follow the the provided examples.";

pub(crate) const CONCEPTUALIZE_SHOTS: &[(&str, &str)] = &[
    (
        "Does Rusev have to worry about human overpopulation in his homeland?",
        "We first identify all named entities, special nouns and numerical values: Rusev, human overpopulation, his homeland. In order to keep the question answerable, we can only replace Rusev with Person X, because the original question's solution depends on knowing the issue in consideration is human overpopulation. Moreover, replacing \"his homeland\" will lead to too much ambiguity. As a result, we can replace \"Rusev\" to \"Person X\" (person_x: str) So the question becomes Does Person X have to worry about human overpopulation in his homeland? With parameters person_x=\"Rusev\"",
    ),
    (
        "Can the Very Large Telescope observe the largest mountain on Earth?",
        "We first identify all named entities, special nouns and numerical values: the Very Large Telescope, the largest mountain on Earth. We can replace these entities with fine-grained semantic types that keep the question answerable. The original question's general solution works as long as it knows that the Very Large Telescope is a Telescope on Earth, and the object in question is a geographical feature also on Earth.  As a result, we can replace \"the Very Large Telescope\" to \"Telescope X\" (telescope_x: str) \"the largest mountain on Earth\" to \"Geographical Feature Y\" (geo_feature_y: str) So the question becomes Can Telescope X on Earth observe Geographical Feature Y on Earth? With parameters telescope_x=\"Very Large Telescope\", geo_feature_y=\"the largest mountain on Earth\"",
    ),
    (
        "Will the Albany in Georgia reach a hundred thousand occupants before the one in New York?",
        "We first identify all named entities, special nouns and numerical values: Albany in Georgia, a hundred thousand, the one in New York. The original question's solution can be generalized to checking if a city will reach a specific population before another city. This means that we can conceptualize the two cities in the original question with \"City\", and the number as Population. As a result, we can replace \"Albany in Georgia\" to \"City X\" (city_x: str) \"a hundred thousand occupants\" to \"Population Y\" (population_y: int) \"the one in New York\" to \"City Z\" (city_z: str) So the question becomes Will City X reach Population Y before City Z? With parameters city_x=\"Albany, Georgia\", population_y=100000, city_z=\"Albany, New York\"",
    ),
    (
        "Would the top of Mount Fuji stick out of the Sea of Japan?",
        "We first identify all named entities, special nouns and numerical values: Mount Fuji, Sea of Japan. The generalized solution of the original question can be applied as long as we know Mount Fuji is a mountain (we cannot simply conceptulize it into geographical feature because the solution only works for features that point upwards such as a mountain), and Sea of Japan is a body of water (similarly, it needs to have depths.) As a result, we can replace \"Mount Fuji\" to \"Mountain X\" (mountain_x: str) \"the Sea of Japan\" to \"Body of Water Y\" (body_of_water_y: str) So the question becomes Would the top of Mountain X stick out of Body of Water Y? With parameters mountain_x=\"Mount Fuji\", body_of_water_y=\"the Sea of Japan\"",
    ),
    (
        "Did any country in Portuguese Colonial War take a general neutral role in WWII?",
        "We first identify all named entities, special nouns and numerical values: Portuguese Colonial War, a general neutral role, WWII. The original solution checks for the involving countries in the first war, then checks if any of these countries took a general neutral role in the second war. We should not replace \"a general nutral role\" with its semantic type, because the solution would be vastly different for other roles. As a result, we can replace \"Portuguese Colonial War\" to \"War X\" (war_x: str) \"WWII\" to \"War Y\" (war_y: str) So the question becomes Did any country in War X take a general neutral role in War Y? With parameters war_x=\"Portuguese Colonial War\", war_y=\"WWII\"",
    ),
    (
        "Was Lil Jon's top ranked Billboard song a collaboration with a member of The Lox?",
        "We first identify all named entities, special nouns and numerical values: Lil Jon, Billboard, The Lox. In order to keep the question answerable with the original problem-solving path, we should not replace 'Billboard', because the solution depends on knowing what kind of song the question is asking for. As a result, we can replace \"Lil Jon\" to \"Artist X\" (artist_x: str) \"The Lox\" to \"Group Y\" (group_y: str) So the question becomes Was Artist X's top ranked Billboard song a collaboration with a member of Group Y? With parameters artist_x=\"Lil Jon\", group_y=\"The Lox\"",
    ),
];

const COT_SYSTEM: &str = "Solve the given question. Follow the way in the given examples to answer the questions. At the end, you must say if you have to guess an answer, the answer is yes/no.";

const COT_SHOTS: &[(&str, &str)] = &[
    (
        "Can the Very Large Telescope observe the largest mountain on Earth?",
        "The Very Large Scope is in Chile. The largest mountain on Earth is mount Everest, which is in Nepal. The earth curvature is in between the two entities and there is not a line of sight. As a result, if I have to guess an answer, the answer is no.",
    ),
    (
        "Did Bill Nye vote for Franklin Delano Roosevelt?",
        "Bill Nye was born in 1955. Franklin Delano Roosevelt's last election was in 1944. Bill Nye was not born nor alive at the time Roosevelt was running. As a result, if I have to guess an answer, the answer is no.",
    ),
    (
        "Does table tennis use prime numbers?",
        "Table tennis plays to 11 points each game. 11 is a prime number. As a result, if I have to guess an answer, the answer is yes.",
    ),
    (
        "Would an Evander Holyfield 2020 boxing return set age record?",
        "Evander Holyfield will turn 58 years old at the end of 2020. Steve Ward holds the world's oldest boxer title at age 59. 58 is younger than 59 and not enough to set the record. As a result, if I have to guess an answer, the answer is no.",
    ),
    (
        "Would the top of Mount Kilimanjaro stick out of the Sea of Japan?",
        "The height of Mount Kilimanjaro is about 5,895 meters, while the Sea of Japan has a maximum depth of 3,742 meters. So, the top of Mount Kilimanjaro is taller than the maximum depth of the Sea of Japan. If we were to put Mount Kilimanjaro in the Sea of Japan, it will stick out. As a result, if I have to guess an answer, the answer is yes.",
    ),
];

const ASK_SYSTEM: &str = "Answer the question in the expected type. Use your best educated guess or estimation if needed. Follow the provided examples and return a JSON dictionary with key 'answer'.";

const ASK_SHOTS: &[(&str, &str)] = &[
    ("How many people today are related to Genghis Khan? (int)", "{\"answer\": 35000000}"),
    ("What is the profession of Michael Jackson? (str)", "{\"answer\": singer}"),
    (
        "Who has more than one Nobel Prize? (list)",
        "{\"answer\": [\"John Bardeen\", \"Frederick Sanger\", \"Linus Pauling\", \"Marie Curie\"]}",
    ),
    ("Does anchors on KBS speak Arabic? (bool)", "{\"answer\": false}"),
];

const ENTITIES_SYSTEM: &str = "Follow the examples, for the given conceptualized question, generate some possible entities based on the type, and the provided example. Try to be diverse and creative.";

const ENTITIES_SHOTS: &[(&str, &str)] = &[
    (
        "Question: Was a person sold License X for Artwork Y ripped off? Entity: License X Example: Creative Commons License",
        "MIT License\nGeneral Public License\nBSD License\nCopyLeft License\nArtistic License\nExclusive License\nVARA License\nEND",
    ),
    (
        "Question: Is Technology X able to make Object Y? Entity: Object Y Example: adenovirus",
        "prosthetics\nplastic bottles\ncoffee\nsmartphones\ncontact lenses\nfurniture\ncomputer software\nfood\nEND",
    ),
];

const STATEMENTS_SYSTEM: &str = "Follow the examples for the given conceptualized statement and generate the missing entities based on the type so that the given statement holds. Try to be diverse and creative.";

const STATEMENTS_SHOTS: &[(&str, &str)] = &[
    (
        "Statement: If someone loves chocolate, they enjoy Compound Y. Entity: Company Y: str (e.g., capsaicin)",
        "{\"Compound Y\": \"Theobromine\", \"statement\": \"If someone loves chocolate, they enjoy Theobromine.\"}\n{\"Compound Y\": \"Phenylethylamine\", \"statement\": \"If someone loves chocolate, they enjoy Phenylethylamine.\"}\n{\"Compound Y\": \"Anandamide\", \"statement\": \"If someone loves chocolate, they enjoy Anandamide.\"}\n{\"Compound Y\": \"Tryptophan\", \"statement\": \"If someone loves chocolate, they enjoy Tryptophan.\"}\n{\"Compound Y\": \"Caffeine\", \"statement\": \"If someone loves chocolate, they enjoy Caffeine.\"}",
    ),
    (
        "Statement: Person X was present at the Year Y Met Gala. Entity: Person X: str (e.g., Bruce Lee), Year Y: int (e.g., 1964)",
        "{\"Person X\": \"Blake Lively\", \"Year Y\": 2018, \"statement\": \"Blake Lively was present at the 2018 Met Gala.\"}\n{\"Person X\": \"Kendall Jenner\", \"Year Y\": 2021, \"statement\": \"Kendall Jenner was present at the 2021 Met Gala.\"}\n{\"Person X\": \"Rihanna\", \"Year Y\": 2017, \"statement\": \"Rihanna was present at the 2017 Met Gala.\"}\n{\"Person X\": \"Lady Gaga\", \"Year Y\": 2019, \"statement\": \"Lady Gaga was present at the 2019 Met Gala.\"}\n{\"Person X\": \"Beyonce\", \"Year Y\": 2015, \"statement\": \"Beyonce was present at the 2015 Met Gala.\"}",
    ),
];

const REFINE_SYSTEM: &str = "Based on the given question, a person wrote a Python program. They used the following helper functions: ask_gpt(query: str, type): ask a simple question to the knowledgeable GPT model and returns the answer in the desired type. However, the program this person wrote failed on some test cases. Given the program, and the failed test cases with corresponding reasons, write a new program that address any potential issues.";

const REFINE_SHOTS: &[(&str, &str)] = &[(
    "Original Question: Did Coach X (coach_x: str) turn her chair around for Contestant Y (contestant_y: str) on TV Show Z (tv_show_z: str)? Program the person wrote:
'''
We need to consider if Contestant Y appeared on TV Show Z and if Coach X turned their chair around for Contestant Y.
'''

def participant(contestant: str, tv_show: str) -> bool:
	question = f\"Did {contestant} participate in {tv_show}?\"
	participation = ask_gpt(question, bool)
	return participation
def chair_turn(coach: str, contestant: str, tv_show: str) -> bool:
	question = f\"Did {coach} turn their chair around for {contestant} on {tv_show}?\"
	chair_turned = ask_gpt(question, bool)
	return chair_turned
def answer(coach_x: str, contestant_y: str, tv_show_z: str):
	participated = participant(contestant_y, tv_show_z)
	if not participated:
		return \"Must be no\"
	chair_turned = chair_turn(coach_x, contestant_y, tv_show_z)
	return \"Must be yes\" if chair_turned else \"Must be no\"
Failed case 1: answer(coach_x=\"Adam Levine\", contestant_y=\"John Legend\", tv_show_z=\"The Voice\")
Failed reason 1: The concrete question in this case is 'Did Adam Levine turn her chair around for John Legend on The Voice?' Adam Levine and John Legend have both been coaches on \"The Voice,\" but the premise of the question contains a misunderstanding of the show's format. \"Turning chairs\" is something coaches do during blind auditions to signal they want an artist to join their team. Since John Legend and Adam Levine are both coaches, they would not be auditioning and therefore would not have a chair turn situation between them.  As a result, if I have to guess an answer, the answer is no. However, the program returned results 'Yes'.",
    "def check_contestant(contestant: str, tv_show: str) -> bool:
	question = f\"Did {contestant} participate in {tv_show} as a contestant?\"
	participation = ask_gpt(question, bool)
	return participation
def check_coach(judge: str, tv_show: str) -> bool:
	question = f\"Did {judge} participate in {tv_show} as a coach?\"
	participation = ask_gpt(question, bool)
	return participation
def chair_turn(coach: str, contestant: str, tv_show: str) -> bool:
	question = f\"Did {coach} turn their chair around for {contestant} on {tv_show}?\"
	chair_turned = ask_gpt(question, bool)
	return chair_turned
def answer(coach_x: str, contestant_y: str, tv_show_z: str):
	is_coach = check_coach(coach_x, tv_show_z)
	is_contestant = check_contestant(contestant_y, tv_show_z)
	if not is_coach or not is_contestant:
		return \"Must be no\"
	chair_turned = chair_turn(coach_x, contestant_y, tv_show_z)
	return \"Must be yes\" if chair_turned else \"Must be no\"",
)];

const PROGRAM_SYSTEM: &str = "Based on the given question, write a Python program with some abstraction that solves the given question and all other similar questions that can be solved in a similar fashion. Think as comprehensively as possible, so that the program would work on any inputs. You can use the following helper function: ask_llm(query: str, type) to ask a simple question to the knowledgeable GPT model and returns the answer in the desired type.";

pub(crate) const PROGRAM_SHOTS: &[(&str, &str)] = &[(
    "Is there a rapper whose real name is similar to Rapper X (rapper_x: str)'s real name have more than N times (multiplier_n: int) of Award Y (award_y: str) than Rapper X (rapper_x: str)? Multiple Choices: A) yes B) no",
    "'''
We can first find a list of rappers with enough Award Y, then check if any of them share a similar name with Rapper X.
'''

def rapper_real_name(name: str) -> str:
	question = f\"What is the real or legal name of rapper {name}?\"
	real_name = ask_gpt(question, str)
	return real_name
def rapper_awards(name: str, award_name: str) -> int:
	question = f\"How many {award_name} has the rapper {name} won?\"
	num_awards = ask_gpt(question, int)
	return num_awards
def list_of_rappers_with_certain_awards(award_name: str, award_count: int) -> list:
	question = f\"Give me a list of rappers who have won at least {str(award_count)} {award_name}.\"
	list_of_rappers = ask_gpt(question, list)
	return list_of_rappers
def name_similar(name_1: str, name_2: str) -> bool:
	question = f\"Is the name '{name_1}' similar to the name '{name_2}'?\"
	name_is_similar = ask_gpt(question, bool)
	return name_is_similar
def answer(rapper_x: str, award_y: str, multiplier_n: int):
	reference_person_awards_count = rapper_awards(rapper_x, award_y)
	target_award_count = int(multiplier_n * reference_person_awards_count)
	candidates = list_of_rappers_with_certain_awards(award_y, target_award_count)
	reference_person_real_name = rapper_real_name(rapper_x)
	for candidate_name in candidates:
		candidate_real_name = rapper_real_name(candidate_name)
		if name_similar(candidate_real_name, reference_person_real_name):
			return \"Must be yes\"
	return \"Must be no\"
#The program ends here.
",
)];

const DECLARATIVIZE_SYSTEM: &str = "Rewrite the given yes/no question as a declarative statement that would make the answer yes. Keep every capitalized placeholder such as Person X exactly as written. Reply with the statement only.";

const DECLARATIVIZE_SHOTS: &[(&str, &str)] = &[
    (
        "Would the top of Mountain X stick out of Body of Water Y?",
        "The top of Mountain X would stick out of Body of Water Y.",
    ),
    (
        "Was Artist X's top ranked Billboard song a collaboration with a member of Group Y?",
        "Artist X's top ranked Billboard song was a collaboration with a member of Group Y.",
    ),
];

const MCQ_SYSTEM: &str = "Combine the multiple-choice question and its correct answer into one yes/no question whose answer is yes. Reply with the question only.";

const MCQ_SHOTS: &[(&str, &str)] = &[(
    "Question: Where would you store a jar of pickles after opening it? Answer: refrigerator",
    "Would you store a jar of pickles in the refrigerator after opening it?",
)];
