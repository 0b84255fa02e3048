#include <doctest.h>

#include <fstream>
#include <sstream>

#include <json.hpp>

#include "iclsel/error.hpp"
#include "iclsel/prompting.hpp"

using namespace iclsel;

namespace {

const std::string kBase =
    "Classify the following news article titles as ideologically liberal, neutral, or "
    "conservative. Titles with no ideological content are classified as neutral.";

ContentItem make(std::string id, std::string title, std::optional<std::string> source,
                 std::optional<std::string> description, std::optional<Ideology> label) {
  ContentItem item;
  item.id = std::move(id);
  item.title = std::move(title);
  item.source = std::move(source);
  item.description = std::move(description);
  item.label = label;
  return item;
}

struct Fixture {
  std::vector<ContentItem> train = {
      make("d1", "Workers rally for a higher minimum wage", "Mother Jones", "Unions march.", Ideology::Liberal),
      make("d2", "Border crisis deepens as crossings hit record", "Fox News", "Agents overwhelmed.",
           Ideology::Conservative),
      make("d3", "City council approves new bus routes", std::nullopt, "Transit update.", Ideology::Neutral),
  };
  ContentItem query = make("q", "Senate debates the infrastructure bill", "Reuters",
                           "Lawmakers weigh spending.", Ideology::Liberal);
  ItemLookup lookup = make_item_lookup(train);

  DemonstrationSet demos(std::size_t k) const {
    DemonstrationSet d;
    d.query_id = "q";
    for (std::size_t i = 0; i < k; ++i) {
      const auto& item = train[i % train.size()];
      d.members.push_back({item.id, *item.label, i + 1});
    }
    d.k_requested = k;
    return d;
  }
};

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  REQUIRE(in);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

std::size_t count_of(const std::string& text, const std::string& needle) {
  std::size_t n = 0;
  for (auto pos = text.find(needle); pos != std::string::npos; pos = text.find(needle, pos + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("instructions match the reference wording") {
  CHECK(instruction_for(FieldConfig::title_only(), false) ==
        kBase + " Only respond with the final answer.");
  CHECK(instruction_for(FieldConfig::title_source(), false) ==
        kBase + " The news source is also specified for additional context. Only respond with the final answer.");
  CHECK(instruction_for(FieldConfig::title_description(), false) ==
        kBase +
            " The news description is also specified for additional context. Only respond with the final answer.");
  CHECK(instruction_for(FieldConfig::title_source_description(), false) ==
        kBase +
            " The news source is also specified for additional context. The news description is also specified "
            "for additional context. Only respond with the final answer.");
}

TEST_CASE("chain-of-thought instruction") {
  const auto text = instruction_for(FieldConfig::title_only(), true);
  CHECK(text.rfind(kBase, 0) == 0);
  CHECK(text.find("Answer:") != std::string::npos);
  CHECK(text.find("step-by-step") != std::string::npos);
  CHECK(text.find("Only respond with the final answer.") == std::string::npos);
}

TEST_CASE("invalid field config is rejected") {
  CHECK_THROWS_AS(instruction_for(FieldConfig{false, false, false}, false), Error);
}

TEST_CASE("golden prompt for title+source with three demonstrations") {
  Fixture f;
  const auto prompt = render(f.query, f.demos(3), f.lookup, FieldConfig::title_source());
  CHECK(prompt.text() == read_file(ICLSEL_FIXTURE_DIR "/prompt_title_source_k3.txt"));
}

TEST_CASE("demo block count follows k") {
  Fixture f;
  for (std::size_t k : {0u, 4u, 8u, 12u}) {
    for (const auto& config : kAblationFieldConfigs) {
      const auto prompt = render(f.query, f.demos(k), f.lookup, config);
      CHECK(prompt.demo_blocks.size() == k);
      CHECK(count_of(prompt.text(), "Ideology: ") == k);
      CHECK(count_of(prompt.text(), "Title: ") == k + 1);
      CHECK(prompt.text().rfind(instruction_for(config, false), 0) == 0);
      if (k == 0) CHECK(prompt.text() == prompt.instruction + "\n\n" + prompt.query_block);
    }
  }
}

TEST_CASE("blocks render configured fields in fixed order") {
  Fixture f;
  const auto prompt = render(f.query, f.demos(3), f.lookup, FieldConfig::title_source_description());
  CHECK(prompt.demo_blocks[0] ==
        "Title: Workers rally for a higher minimum wage\nSource: Mother Jones\nDescription: Unions "
        "march.\nIdeology: Liberal");
  // missing source line is omitted, not blank
  CHECK(prompt.demo_blocks[2] ==
        "Title: City council approves new bus routes\nDescription: Transit update.\nIdeology: Neutral");
  CHECK(prompt.query_block ==
        "Title: Senate debates the infrastructure bill\nSource: Reuters\nDescription: Lawmakers weigh spending.");

  const auto title_only = render(f.query, f.demos(3), f.lookup, FieldConfig::title_only());
  CHECK(title_only.text().find("Source:") == std::string::npos);
  CHECK(title_only.text().find("Description:") == std::string::npos);
}

TEST_CASE("query gold label never reaches the query block") {
  Fixture f;
  for (auto label : kAllIdeologies) {
    f.query.label = label;
    const auto prompt = render(f.query, f.demos(3), f.lookup, FieldConfig::title_source());
    CHECK(prompt.query_block.find("Ideology") == std::string::npos);
    CHECK(prompt.query_block.find(std::string(display_name(label))) == std::string::npos);
  }
}

TEST_CASE("rendering is deterministic and multi-line values collapse") {
  Fixture f;
  f.train[0].title = "Line one\n  line two\t";
  f.lookup = make_item_lookup(f.train);
  const auto a = render(f.query, f.demos(2), f.lookup, FieldConfig::title_only());
  const auto b = render(f.query, f.demos(2), f.lookup, FieldConfig::title_only());
  CHECK(a.text() == b.text());
  CHECK(a.demo_blocks[0] == "Title: Line one line two\nIdeology: Liberal");
}

TEST_CASE("reversed demo order") {
  Fixture f;
  RenderOptions options;
  options.demo_order = DemoOrder::reversed;
  const auto prompt = render(f.query, f.demos(3), f.lookup, FieldConfig::title_only(), options);
  CHECK(prompt.demo_labels.front() == Ideology::Neutral);
  CHECK(prompt.demo_labels.back() == Ideology::Liberal);
}

TEST_CASE("render errors") {
  Fixture f;
  DemonstrationSet unknown;
  unknown.members.push_back({"nope", Ideology::Neutral, 1});
  CHECK_THROWS_AS(render(f.query, unknown, f.lookup, FieldConfig::title_only()), Error);

  f.train[0].label.reset();
  f.lookup = make_item_lookup(f.train);
  DemonstrationSet unlabeled;
  unlabeled.members.push_back({"d1", Ideology::Neutral, 1});
  CHECK_THROWS_AS(render(f.query, unlabeled, f.lookup, FieldConfig::title_only()), Error);

  ContentItem empty_query = make("e", "", std::nullopt, std::nullopt, std::nullopt);
  CHECK_THROWS_AS(render(empty_query, DemonstrationSet{}, f.lookup, FieldConfig::title_only()), Error);
}

TEST_CASE("description budget truncation") {
  Fixture f;
  f.query.description = std::string(400, 'x');
  RenderOptions options;
  const auto full = render(f.query, f.demos(3), f.lookup, FieldConfig::title_description(), options);
  options.max_chars = full.text().size() - 100;
  const auto cut = render(f.query, f.demos(3), f.lookup, FieldConfig::title_description(), options);
  CHECK(cut.text().size() <= options.max_chars);
  CHECK(cut.text().size() >= options.max_chars - 8);
  CHECK(cut.demo_blocks.size() == 3);

  options.max_chars = 50;
  try {
    render(f.query, f.demos(3), f.lookup, FieldConfig::title_description(), options);
    FAIL("expected prompt_too_long");
  } catch (const Error& e) {
    CHECK(e.code() == "prompt_too_long");
  }
}

TEST_CASE("truncation does not split UTF-8 sequences") {
  Fixture f;
  std::string desc;
  for (int i = 0; i < 100; ++i) desc += "\xc3\xa9";  // e-acute
  f.query.description = desc;
  RenderOptions options;
  const auto full = render(f.query, DemonstrationSet{}, f.lookup, FieldConfig::title_description(), options);
  options.max_chars = full.text().size() - 41;
  const auto cut = render(f.query, DemonstrationSet{}, f.lookup, FieldConfig::title_description(), options);
  const auto pos = cut.query_block.find("Description: ");
  REQUIRE(pos != std::string::npos);
  const auto value = cut.query_block.substr(pos + 13);
  CHECK(value.size() % 2 == 0);
  CHECK(value.size() > 0);
}

TEST_CASE("chat layout splits demos into turns") {
  Fixture f;
  const auto prompt = render(f.query, f.demos(2), f.lookup, FieldConfig::title_source());
  const auto chat = to_messages(prompt, PromptLayout::chat);
  REQUIRE(chat.size() == 6);
  CHECK(chat[0].role == "system");
  CHECK(chat[0].content == prompt.instruction);
  CHECK(chat[1].role == "user");
  CHECK(chat[1].content == "Title: Workers rally for a higher minimum wage\nSource: Mother Jones");
  CHECK(chat[2].role == "assistant");
  CHECK(chat[2].content == "Ideology: Liberal");
  CHECK(chat[5].content == prompt.query_block);

  const auto flat = to_messages(prompt, PromptLayout::flat);
  REQUIRE(flat.size() == 1);
  CHECK(flat[0].content == prompt.text());
}

TEST_CASE("prompt dump json") {
  Fixture f;
  const auto prompt = render(f.query, f.demos(1), f.lookup, FieldConfig::title_only());
  const auto doc = nlohmann::json::parse(prompt_dump_json("q", prompt));
  CHECK(doc["query_id"] == "q");
  CHECK(doc["prompt"] == prompt.text());
}
