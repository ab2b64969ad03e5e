#include "consentforge/prompts.hpp"

#include <stdexcept>

namespace consentforge::prompts {

namespace {

constexpr std::string_view kDirect =
R"(As an intelligent principal investigator of a clinical trial, you must provide a clear summary using the consent form text. The summary should include a statement that explain the purpose of the research, a description of the procedures, how long the subject will be involved in the study, the risks, the benefits, the subject's participation is voluntary, and the alternatives if the subject decides not to participate.

Use the following guidelines to create a summary in a paragraph style:

- Summary must be at most 150 words
- Simplify any complex terms or concepts
- Make the summary highly understandable, recommended for eighth-grade level audience
- Use respectful and empowering language for patients
- Spell out acronyms upon first use
- Include all relevant information without adding extra details
- Use active voice
- Keep the summary concise and to the point

Form Text: {form_text})";

constexpr std::string_view kRequest1 =
R"(You are a smart principal investigator for a clinical trial, and I will give you the text of the consent form. Below are questions separated by |. I want you to get the full exact text for each question if it's in the form else return "na". Provide responses with the exact text from the form in defined format. Rephrasing text is not allowed, and you should not skip over information on the form.

Points:

1. Does the study involve medical research?|
2. What is the purpose of this research study?|
3. How long will the participant be involved in the study?|
4. What procedures will the participant need to follow?|
5. Are any of the procedures experimental?|
6. What are the risks or discomforts of participating?|
7. What are the benefits of participating?|
8. How many people will be participating in the study?|

```
response1 = {"study_research": <exact_text_1>,
             "purpose": <exact_text_2>,
             "duration": <exact_text_3>,
             "procedures": <exact_text_4>,
             "experimental_procedures": <exact_text_5>,
             "risks": <exact_text_6>,
             "benefits": <exact_text_7>,
             "participants": <exact_text_8>}}
```

Be consistent with the naming of the keys and the format of the values. Form text: {form_text})";

constexpr std::string_view kRequest2 =
R"(You are a smart principal investigator for a clinical trial, and you will be given the text of consent form. Below are questions separated by |. I want you to get the full exact text for each question if it's in the form else return "na". Provide responses with the exact text from the form in the defined format. Rephrasing text is not allowed, and you should not skip over information on the form.

Points:

9. What other treatment options may help the participant besides this research study?|
10. How will the researchers keep the participant's records private?|
11. What are details on compensation, medical treatments, injuries, and where individuals can find more information?|
12. Who can the participant contact if they have questions or get hurt in the research?|
13. Can the participant drop out of the study anytime without consequences?|
14. For what reasons could the researchers remove the participant from the study?|
15. Will participating cost the participant anything?|
16. If the participant wants to stop the study, what should they do and what happens next?|
17. Will the researchers let the participant know if they find anything important that could change their decision to stay in the study?|

```
response2 = {"alternative_procedures": <exact_text_1>,
             "confidentiality": <exact_text_2>,
             "compensation": <exact_text_3>,
             "contact_info": <exact_text_4>,
             "voluntary_participation": <exact_text_5>,
             "discontinue_cooperation": <exact_text_6>,
             "additional_costs": <exact_text_7>,
             "withdrawal_effects": <exact_text_8>,
             "new_findings": <exact_text_9>}}
```

Be consistent with the naming of the keys and the format of the values. Form text: {form_text})";

constexpr std::string_view kSequential =
R"(As the intelligent principal investigator of a clinical trial, you've received extracted text from the consent form. You must provide a clear summary.

The summary should include a statement that explain the purpose of the research, a description of the procedures, how long the subject will be involved in the study, the risks, the benefits, the subject's participation is voluntary, and the alternatives if the subject decides not to participate.

Use the following guidelines to create a summary in a paragraph style:

- Summary must be at most 150 words
- Simplify any complex terms or concepts
- Make the summary highly understandable, recommended for eighth-grade level audience
- Use respectful and empowering language for patients
- Spell out acronyms upon first use
- Include all relevant information without adding extra details
- Use active voice
- Keep the summary concise and to the point

Your extracted text is: {extracted_content})";

constexpr std::string_view kMcqaSystem =
    "You are a smart AI assistant. Given an example consent form and a multiple-choices question in a "
    "specific topic regarding the form that helps patient understand the form. Now generate new questions "
    "regarding the new form in the same topic.";

constexpr std::string_view kMcqaUser1 =
    "===Example consent form===: \n <text of the example ICF> \n\n ===Topic===: \n <target topic> \n "
    "Generate a multiple-choices question in the given topic regarding the given consent form.";

constexpr std::string_view kMcqaAssistant = "===Example question===: \n <human-generated MCQA for the target topic>";

constexpr std::string_view kMcqaUser2 =
    "===New consent form===: \n <target ICF> \n\n ===Topic===: \n <target topic> \n "
    "Generate one multiple-choices question in the given topic regarding the new consent form; the correct "
    "option of each new question should not be the original sentences from the consent form.";

constexpr std::string_view kVerifierSystem = "You are an AI assistant for answering the multiple-choices question";

constexpr std::string_view kVerifierUser =
    "Please answer the following multiple-choice question based on the given clinical trial consent form; "
    "there is only one correct answer. Return the correct option at the beginning of the response, then "
    "explain reason and why other options are incorrect. \n\n\n Consent form: <target ICF> \n\n\n Question: <MCQA>";

} // namespace

std::string_view direct_summary() { return kDirect; }
std::string_view extraction_request1() { return kRequest1; }
std::string_view extraction_request2() { return kRequest2; }
std::string_view sequential_summary() { return kSequential; }
std::string_view mcqa_system() { return kMcqaSystem; }
std::string_view mcqa_user1() { return kMcqaUser1; }
std::string_view mcqa_assistant() { return kMcqaAssistant; }
std::string_view mcqa_user2() { return kMcqaUser2; }
std::string_view verifier_system() { return kVerifierSystem; }
std::string_view verifier_user() { return kVerifierUser; }

std::string render(std::string_view tmpl, const Bindings& bindings) {
    std::vector<bool> used(bindings.size(), false);
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        bool matched = false;
        for (std::size_t b = 0; b < bindings.size(); ++b) {
            const auto& [placeholder, value] = bindings[b];
            if (tmpl.compare(i, placeholder.size(), placeholder) == 0) {
                out.append(value);
                i += placeholder.size();
                used[b] = true;
                matched = true;
                break;
            }
        }
        if (!matched) out.push_back(tmpl[i++]);
    }
    for (std::size_t b = 0; b < bindings.size(); ++b) {
        if (!used[b]) throw std::logic_error("template lacks placeholder " + std::string(bindings[b].first));
    }
    return out;
}

} // namespace consentforge::prompts
