#include "ropelab/selfinstruct.hpp"

namespace ropelab::templates {

// Line breaks and trailing spaces are part of the templates.
const std::string_view kNormalAnswerPrompt =
    "[INST] You are given a text chunk (delimited by triple quotes) taken from a long \n"
    "text. Write a question about this text and provide the correct answer. The answer \n"
    "needs to be based on the text. This question will later be used as a reading \n"
    "comprehension test over the entire document. Wrap the question and answer using \n"
    "XML tags (<question> and </question>, <answer> and </answer>).\n"
    "\"\"\"\n"
    "{TEXT_CHUNK}\n"
    "\"\"\"\n"
    "[/INST]";

const std::string_view kShortAnswerPrompt =
    "[INST] You are given a text chunk (delimited by triple quotes) from a long \n"
    "document. Based on information from the text, come up with a specific question \n"
    "**which can be answered in a few words or a single phrase** and provide the \n"
    "correct answer without explanation. The answer needs to be based on the text. \n"
    "This question will later be used as a reading comprehension test over the \n"
    "entire document. Wrap the question and answer using XML tags (<question> \n"
    "and </question>, <answer> and </answer>). Again, the answer needs to be short.\n"
    "\"\"\"\n"
    "{TEXT_CHUNK}\n"
    "\"\"\"\n"
    "[/INST]";

const std::string_view kNormalAnswerData =
    "[INST] You are given a long text (delimited by triple quotes) and a question. \n"
    "Read the text and answer the question in the end.\n"
    "\"\"\"\n"
    "{FULL_DOCUMENT}\n"
    "\"\"\"\n"
    "Question: {QUESTION} \n"
    "[/INST]\n"
    "{ANSWER}";

const std::string_view kShortAnswerData =
    "[INST] You are given a long text (delimited by triple quotes) and a question. \n"
    "Read the text and answer the question in the end as concisely as you can, \n"
    "using a single phrase or sentence if possible. Do not provide any explanation.\n"
    "\"\"\"\n"
    "{FULL_DOCUMENT}\n"
    "\"\"\"\n"
    "Question: {QUESTION} \n"
    "[/INST]\n"
    "{ANSWER}";

std::string_view qa_prompt(AnswerStyle style) {
    return style == AnswerStyle::Short ? kShortAnswerPrompt : kNormalAnswerPrompt;
}

std::string_view data_template(AnswerStyle style) {
    return style == AnswerStyle::Short ? kShortAnswerData : kNormalAnswerData;
}

} // namespace ropelab::templates
