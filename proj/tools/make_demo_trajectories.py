"""Writes data/demo/trajectories.jsonl: ten Clean trajectories over the demo catalog."""
import json
import pathlib

ROOT = pathlib.Path(__file__).resolve().parent.parent


def turn(tool, args, thought, observation):
    return {"tool": tool, "arguments": args, "thought": thought, "observation": observation}


def finish(answer):
    return turn("finish", {"final_answer": answer}, "I have everything I need.", "")


TRAJECTORIES = [
    ("t01", "c1", "What is the weather like in Paris right now? Please answer in celsius.", [
        turn("get_weather", {"city": "Paris", "unit": "celsius"},
             "Call get_weather with city set to Paris.", '{"city": "Paris", "temperature": 18, "unit": "celsius"}'),
        finish("It is 18 degrees celsius in Paris."),
    ]),
    ("t02", "c2", None, [
        turn("get_quotes", {"symbols": "AAPL,MSFT", "region": "US"},
             "get_quotes can return both symbols at once.", '{"AAPL": 189.2, "MSFT": 411.5}'),
        finish("AAPL trades at 189.2 and MSFT at 411.5."),
    ]),
    ("t03", "c3", None, [
        turn("predict_age", {"names": "Maria,Juan,Carlos"},
             "predict_age takes a comma separated names list.", '{"Maria": 47, "Juan": 55, "Carlos": 52}'),
        finish("Maria 47, Juan 55, Carlos 52."),
    ]),
    ("t04", "c4", None, [
        turn("search_recipes", {"query": "pasta", "max_results": "3", "diet": "vegan"},
             "Use search_recipes with the diet filter.", '["Pasta primavera", "Aglio e olio", "Arrabbiata"]'),
        finish("Pasta primavera, aglio e olio and arrabbiata."),
    ]),
    ("t05", "c5", None, [
        turn("convert_currency", {"amount": "250", "from_currency": "USD", "to_currency": "EUR"},
             "convert_currency needs amount, from_currency and to_currency.", '{"result": 231.4}'),
        finish("250 USD is 231.4 EUR."),
    ]),
    ("t06", "c6", None, [
        turn("get_weather", {"city": "Tokyo"}, "First get_weather for Tokyo.", '{"summary": "Sunny and warm"}'),
        turn("translate_text", {"text": "Sunny and warm", "target_language": "French"},
             "Then translate_text into French.", '{"translation": "Ensoleille et chaud"}'),
        turn("translate_text", {"text": "Sunny and warm", "target_language": "Spanish"},
             "Now translate_text into Spanish as well.", '{"translation": "Soleado y calido"}'),
        finish("French: Ensoleille et chaud. Spanish: Soleado y calido."),
    ]),
    ("t07", "c1", "How warm is it in Lisbon, in fahrenheit?", [
        turn("get_weather", {"city": "Lisbon", "unit": "fahrenheit"},
             "get_weather supports the unit parameter.", '{"city": "Lisbon", "temperature": 70}'),
        finish("It is 70 degrees fahrenheit in Lisbon."),
    ]),
    ("t08", "c2", "Quote SAP on the German market.", [
        turn("ask_to_user", {"question": "Do you mean the SAP ticker?"}, "The symbol is ambiguous.", "Yes, SAP."),
        turn("get_quotes", {"symbols": "SAP", "region": "DE"},
             "get_quotes with region DE.", '{"SAP": 170.1}'),
        finish("SAP trades at 170.1 EUR."),
    ]),
    ("t09", "c5", "Convert 40 GBP to JPY.", [
        turn("convert_currency", {"amount": "40", "from_currency": "GBP", "to_currency": "JPY"},
             "Single convert_currency call.", '{"result": 7560}'),
        finish("40 GBP is about 7560 JPY."),
    ]),
    ("t10", "c4", "Find two gluten free soups.", [
        turn("search_recipes", {"query": "soup", "max_results": "2", "diet": "gluten_free"},
             "search_recipes with query soup.", '["Lentil soup", "Tomato soup"]'),
        finish("Lentil soup and tomato soup."),
    ]),
]


def main():
    catalog = json.loads((ROOT / "data/demo/catalog.json").read_text())
    queries = {c["id"]: c["query"] for c in catalog["cases"]}
    lines = []
    for tid, case, query, turns in TRAJECTORIES:
        final = turns[-1]["arguments"]["final_answer"]
        record = {"id": tid, "source_case": case, "query": query or queries[case], "turns": turns, "final_answer": final}
        lines.append(json.dumps(record, sort_keys=True, ensure_ascii=False))
    (ROOT / "data/demo/trajectories.jsonl").write_text("\n".join(lines) + "\n")


if __name__ == "__main__":
    main()
