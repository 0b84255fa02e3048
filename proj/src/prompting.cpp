#include "iclsel/prompting.hpp"

#include <algorithm>
#include <cctype>
#include <json.hpp>
#include <optional>

#include "iclsel/error.hpp"

namespace iclsel {

namespace {

constexpr std::string_view kBaseInstruction =
    "Classify the following news article titles as ideologically liberal, neutral, or "
    "conservative. Titles with no ideological content are classified as neutral.";
constexpr std::string_view kSourceSentence =
    " The news source is also specified for additional context.";
constexpr std::string_view kDescriptionSentence =
    " The news description is also specified for additional context.";
constexpr std::string_view kFinalAnswer = " Only respond with the final answer.";
constexpr std::string_view kStepByStep =
    " Think through the task step-by-step, then give your final answer on the last line in the "
    "form \"Answer: <liberal, neutral, or conservative>\".";

// Field values are rendered on one line each.
std::string one_line(std::string_view value) {
  std::string out;
  bool pending_space = false;
  for (char ch : value) {
    if (std::isspace(static_cast<unsigned char>(ch))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out.push_back(' ');
    pending_space = false;
    out.push_back(ch);
  }
  return out;
}

// Cuts at most `limit` bytes without splitting a UTF-8 sequence.
std::string utf8_prefix(const std::string& text, std::size_t limit) {
  if (text.size() <= limit) return text;
  std::size_t cut = limit;
  while (cut > 0 && (static_cast<unsigned char>(text[cut]) & 0xC0) == 0x80) --cut;
  return text.substr(0, cut);
}

std::string render_block(const ContentItem& item, const FieldConfig& config,
                         std::optional<std::size_t> description_limit) {
  std::string block;
  auto line = [&block](std::string_view key, const std::string& value) {
    const std::string flat = one_line(value);
    if (flat.empty()) return;
    if (!block.empty()) block += '\n';
    block += key;
    block += ": ";
    block += flat;
  };
  if (config.include_title) line("Title", item.title);
  if (config.include_source && item.source) line("Source", *item.source);
  if (config.include_description && item.description) {
    std::string desc = one_line(*item.description);
    if (description_limit) desc = utf8_prefix(desc, *description_limit);
    line("Description", desc);
  }
  return block;
}

std::size_t longest_description(const ContentItem& query, const std::vector<const ContentItem*>& demos) {
  std::size_t longest = query.description ? one_line(*query.description).size() : 0;
  for (const auto* demo : demos) {
    if (demo->description) longest = std::max(longest, one_line(*demo->description).size());
  }
  return longest;
}

}  // namespace

std::string instruction_for(const FieldConfig& config, bool cot) {
  config.validate();
  std::string text(kBaseInstruction);
  if (config.include_source) text += kSourceSentence;
  if (config.include_description) text += kDescriptionSentence;
  text += cot ? kStepByStep : kFinalAnswer;
  return text;
}

std::string RenderedPrompt::text() const {
  std::string out = instruction;
  for (const auto& block : demo_blocks) {
    out += "\n\n";
    out += block;
  }
  out += "\n\n";
  out += query_block;
  return out;
}

std::vector<ChatMessage> to_messages(const RenderedPrompt& prompt, PromptLayout layout) {
  if (layout == PromptLayout::flat) return {{"user", prompt.text()}};
  std::vector<ChatMessage> messages{{"system", prompt.instruction}};
  for (std::size_t i = 0; i < prompt.demo_blocks.size(); ++i) {
    const std::string& block = prompt.demo_blocks[i];
    const auto cut = block.rfind("\nIdeology: ");
    messages.push_back({"user", block.substr(0, cut)});
    messages.push_back({"assistant", "Ideology: " + std::string(display_name(prompt.demo_labels[i]))});
  }
  messages.push_back({"user", prompt.query_block});
  return messages;
}

ItemLookup make_item_lookup(const std::vector<ContentItem>& items) {
  ItemLookup lookup;
  lookup.reserve(items.size());
  for (const auto& item : items) lookup.emplace(item.id, &item);
  return lookup;
}

RenderedPrompt render(const ContentItem& query, const DemonstrationSet& demos,
                      const ItemLookup& demo_items, const FieldConfig& config,
                      const RenderOptions& options) {
  config.validate();
  std::vector<const ContentItem*> demo_ptrs;
  for (const auto& member : demos.members) {
    auto it = demo_items.find(member.item_id);
    if (it == demo_items.end()) {
      throw Error("missing_item", "demonstration '" + member.item_id + "' is not in the training set");
    }
    if (!it->second->label) {
      throw Error("missing_label", "demonstration '" + member.item_id + "' has no gold label");
    }
    demo_ptrs.push_back(it->second);
  }
  if (options.demo_order == DemoOrder::reversed) std::reverse(demo_ptrs.begin(), demo_ptrs.end());

  auto build = [&](std::optional<std::size_t> description_limit) {
    RenderedPrompt prompt;
    prompt.cot = options.cot;
    prompt.instruction = instruction_for(config, options.cot);
    for (const auto* demo : demo_ptrs) {
      std::string block = render_block(*demo, config, description_limit);
      block += block.empty() ? "" : "\n";
      block += "Ideology: ";
      block += display_name(*demo->label);
      prompt.demo_blocks.push_back(std::move(block));
      prompt.demo_labels.push_back(*demo->label);
    }
    prompt.query_block = render_block(query, config, description_limit);
    if (prompt.query_block.empty()) {
      throw Error("empty_text", "query '" + query.id + "' has none of the configured fields");
    }
    return prompt;
  };

  RenderedPrompt prompt = build(std::nullopt);
  if (options.max_chars == 0 || prompt.text().size() <= options.max_chars) return prompt;

  // Largest description length that fits, found by bisection; length 0
  // drops the description lines entirely.
  std::size_t lo = 0;
  std::size_t hi = longest_description(query, demo_ptrs);
  if (build(0).text().size() > options.max_chars) {
    throw Error("prompt_too_long", "prompt for '" + query.id + "' exceeds " +
                                       std::to_string(options.max_chars) +
                                       " characters even without descriptions");
  }
  while (lo < hi) {
    const std::size_t mid = lo + (hi - lo + 1) / 2;
    if (build(mid).text().size() <= options.max_chars) {
      lo = mid;
    } else {
      hi = mid - 1;
    }
  }
  return build(lo);
}

std::string prompt_dump_json(const std::string& query_id, const RenderedPrompt& prompt) {
  return nlohmann::json{{"query_id", query_id}, {"prompt", prompt.text()}}.dump();
}

}  // namespace iclsel
