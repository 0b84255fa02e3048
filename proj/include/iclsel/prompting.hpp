#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "iclsel/corpus.hpp"
#include "iclsel/fields.hpp"
#include "iclsel/selection.hpp"

namespace iclsel {

std::string instruction_for(const FieldConfig& config, bool cot);

enum class DemoOrder { admission, reversed };

struct RenderOptions {
  bool cot = false;
  DemoOrder demo_order = DemoOrder::admission;
  // Upper bound on the flat prompt length in bytes; 0 disables the check.
  // Descriptions are shortened first; if that is not enough rendering fails.
  std::size_t max_chars = 0;
};

struct RenderedPrompt {
  std::string instruction;
  std::vector<std::string> demo_blocks;  // each ends with "Ideology: <Label>"
  std::vector<Ideology> demo_labels;
  std::string query_block;
  bool cot = false;

  // Instruction, demo blocks and query block separated by blank lines.
  std::string text() const;
};

struct ChatMessage {
  std::string role;
  std::string content;
};

enum class PromptLayout { flat, chat };

// flat: one user message holding text(). chat: the instruction as the system
// message, each demo as a user/assistant pair, then the query.
std::vector<ChatMessage> to_messages(const RenderedPrompt& prompt, PromptLayout layout);

using ItemLookup = std::unordered_map<std::string, const ContentItem*>;

ItemLookup make_item_lookup(const std::vector<ContentItem>& items);

RenderedPrompt render(const ContentItem& query, const DemonstrationSet& demos,
                      const ItemLookup& demo_items, const FieldConfig& config,
                      const RenderOptions& options = {});

// {"query_id", "prompt"} for audit dumps.
std::string prompt_dump_json(const std::string& query_id, const RenderedPrompt& prompt);

}  // namespace iclsel
