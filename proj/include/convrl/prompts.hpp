#pragma once

#include <string>

namespace convrl {

// Instruction template for the policy. Placeholders: {context_block},
// {last_user_utterance}.
const std::string& policy_prompt_template();

// Judge template. Placeholders: {question}, {golden_answer}, {predicted_answer}.
const std::string& judge_prompt_template();

// Query-rewrite template. Placeholders: {ctx}, {user_utterance}.
const std::string& rewrite_prompt_template();

// Replaces every occurrence of a literal placeholder token in the template.
std::string fill_placeholder(std::string tmpl, const std::string& placeholder,
                             const std::string& value);

}  // namespace convrl
