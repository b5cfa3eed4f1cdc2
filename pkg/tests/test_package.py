import contextlib
import io
import json
from pathlib import Path

import pytest
import yaml
from PIL import Image

from conftest import NOTEBOOKS
from constrictor.errors import (
    InconsistentInputs,
    InvalidMerged,
    InvalidModuleName,
    MissingFile,
    NoNotebooks,
    UnresolvedPlaceholder,
)
from constrictor.nbdoc import Cell, code_cell, markdown_cell, new_notebook, parse_notebook, serialize_notebook
from constrictor.package import (
    DEFAULT_IMAGE,
    HIDE_TAG,
    KEEP_VISIBLE_TAG,
    ProjectConfig,
    apply_branding,
    build_external_package_descriptor,
    build_installer_plan,
    build_menu_entry,
    build_post_install_plan,
    build_welcome_notebook,
    inject_hide_tags,
    menu_entry_path,
)
from constrictor.reqspec import PinnedDependency, RequirementsSpec
from constrictor.versiontrack import VersionManifest, build_version_manifest

CFG = ProjectConfig("DemoApp", "0.1.0")
MERGED = RequirementsSpec("demo", "3.10", (PinnedDependency("numpy", "1.26.4"),))


def test_tags_added_to_code_cells_only():
    nb = new_notebook([code_cell("a"), markdown_cell("m"), code_cell("b")])
    out = inject_hide_tags(nb)
    assert [c.tags for c in out.cells] == [(HIDE_TAG,), (), (HIDE_TAG,)]
    assert inject_hide_tags(out) == out


def test_keep_visible_and_disabled():
    nb = new_notebook([code_cell("a", tags=[KEEP_VISIBLE_TAG])])
    assert inject_hide_tags(nb) == nb
    plain = new_notebook([code_cell("a")])
    assert inject_hide_tags(plain, enabled=False) == plain


def test_duplicate_tags_are_collapsed():
    nb = new_notebook([code_cell("a", tags=["x", HIDE_TAG, HIDE_TAG])])
    assert inject_hide_tags(nb).cells[0].tags == ("x", HIDE_TAG)


@pytest.mark.parametrize("path", sorted(NOTEBOOKS.glob("*.ipynb")), ids=lambda p: p.name)
def test_tagging_only_touches_tags(path):
    nb = parse_notebook(path.read_bytes())
    once = inject_hide_tags(nb)
    assert serialize_notebook(inject_hide_tags(once)) == serialize_notebook(once)
    for before, after in zip(nb.cells, once.cells):
        assert before.source == after.source
        assert json.dumps(before.outputs) == json.dumps(after.outputs)
        assert {k: v for k, v in before.metadata.items() if k != "tags"} == \
            {k: v for k, v in after.metadata.items() if k != "tags"}


def test_post_install_steps():
    plan = build_post_install_plan(MERGED, has_external=True, project_name="DemoApp")
    sh = plan.render_sh().decode()
    assert '"numpy==1.26.4"' in sh
    assert "[3/3]" in sh and "${PREFIX}/external" in sh
    bat = plan.render_bat()
    assert b"\r\n" in bat and b"\n" not in bat.replace(b"\r\n", b"")
    assert b"numpy==1.26.4" in bat and b"%PREFIX%\\external" in bat
    assert plan.referenced_files() == ["external/setup.py"]


def test_post_install_without_dependencies():
    plan = build_post_install_plan(RequirementsSpec("", "3.10"), has_external=False)
    assert [s.title for s in plan.steps] == ["Installing the notebook environment"]
    assert build_post_install_plan(RequirementsSpec("", "3.10"), True).steps[-1].local_dir == "external"


def test_menu_entry():
    entry = build_menu_entry(CFG)
    item = entry["menu_items"][0]
    assert entry["menu_name"] == item["name"] == "DemoApp"
    assert any("Welcome.ipynb" in part for part in item["command"])
    assert "icon" not in item
    branded = ProjectConfig("Demo App", "1", branding={"logo": "img/logo.png"})
    assert build_menu_entry(branded)["menu_items"][0]["icon"].endswith("assets/logo.png")
    assert menu_entry_path(branded) == "Menu/demo-app.json"


def test_welcome_notebook(tmp_path):
    manifest = VersionManifest({"a.ipynb": "1.0", "b.ipynb": "0.2"}, "0.1.0")
    nb = build_welcome_notebook(CFG, [("a.ipynb", "First", "1.0"), ("b.ipynb", "Second", "0.2")], manifest)
    index = nb.cells[1].text
    assert "[a.ipynb](notebooks/a.ipynb)" in index and "Second" in index
    assert 'LOCAL_MANIFEST = "versions.yaml"' in nb.cells[3].text
    assert all(HIDE_TAG in c.tags for c in nb.cells if c.kind == "code")
    with pytest.raises(InconsistentInputs):
        build_welcome_notebook(CFG, [], manifest)
    with pytest.raises(InconsistentInputs):
        build_welcome_notebook(CFG, [("c.ipynb", "", "1")], manifest)


def test_welcome_version_check_runs(tmp_path):
    (tmp_path / "versions.yaml").write_bytes(build_version_manifest([("a.ipynb", "0.0.1")], "0.1.0"))
    (tmp_path / "remote.yaml").write_bytes(build_version_manifest([("a.ipynb", "0.0.2")], "0.1.0"))
    cfg = ProjectConfig("DemoApp", "0.1.0", manifest_source=str(tmp_path / "remote.yaml"))
    nb = build_welcome_notebook(cfg, [("a.ipynb", "", "0.0.1")], VersionManifest({"a.ipynb": "0.0.1"}, "0.1.0"))
    code = "\n".join(c.text for c in nb.cells if c.kind == "code")
    code = code.replace('LOCAL_MANIFEST = "versions.yaml"', f"LOCAL_MANIFEST = {str(tmp_path / 'versions.yaml')!r}")
    out = io.StringIO()
    with contextlib.redirect_stdout(out):
        exec(compile(code, "welcome", "exec"), {})
    assert "a.ipynb: update available 0.0.1 -> 0.0.2" in out.getvalue()


def test_external_descriptor():
    pkg = build_external_package_descriptor("Demo App", ["external/helpers.py"])
    assert pkg.modules == {"helpers": "external/helpers.py"}
    setup = pkg.files["external/setup.py"].decode()
    assert 'py_modules=["helpers"]' in setup
    compile(setup, "setup.py", "exec")
    for bad in (["my-mod.py"], ["class.py"], ["notes.txt"], ["a.py", "sub/a.py"]):
        with pytest.raises(InvalidModuleName):
            build_external_package_descriptor("x", bad)


def _layout(base: Path, files):
    for rel in files:
        (base / rel).parent.mkdir(parents=True, exist_ok=True)
        (base / rel).write_text("x")


def test_installer_plan(tmp_path):
    _layout(tmp_path, ["notebooks/demo.ipynb", "Welcome.ipynb", "versions.yaml", "Menu/demoapp.json",
                       "post_install.sh", "post_install.bat"])
    plan = build_installer_plan(CFG, MERGED, ["notebooks/demo.ipynb"], base_dir=tmp_path)
    doc = yaml.safe_load(plan.to_yaml())
    assert doc["specs"] == ["python=3.10", "pip"]
    assert {"notebooks/demo.ipynb": "notebooks/demo.ipynb"} in doc["extra_files"]
    names = {t.platform: t.output_name for t in plan.targets}
    assert names["Windows-x86_64"].endswith(".exe")
    assert names["MacOSX-x86_64"].endswith(".pkg")
    assert names["Linux-x86_64"].endswith(".sh")
    assert {t.post_install for t in plan.targets} == {"post_install.sh", "post_install.bat"}
    assert plan.to_yaml() == build_installer_plan(CFG, MERGED, ["notebooks/demo.ipynb"], base_dir=tmp_path).to_yaml()


def test_installer_plan_guards(tmp_path):
    with pytest.raises(NoNotebooks):
        build_installer_plan(CFG, MERGED, [], base_dir=tmp_path)
    with pytest.raises(MissingFile):
        build_installer_plan(CFG, MERGED, ["notebooks/demo.ipynb"], base_dir=tmp_path)
    with pytest.raises(InvalidMerged):
        build_installer_plan(CFG, {"python": "3.10"}, ["n.ipynb"], base_dir=tmp_path)


def test_branding(tmp_path):
    (tmp_path / "README.md").write_text("# {{PROJECT_NAME}} {{APP_VERSION}}\n![]({{LOGO}})\n")
    (tmp_path / "notes.txt").write_text("no tokens\n")
    (tmp_path / ".git").mkdir()
    (tmp_path / ".git" / "HEAD").write_text("{{NOT_A_TOKEN}}")
    assert apply_branding(CFG, tmp_path, dry_run=True) == ["README.md", "assets/default_logo.png"]
    assert "{{" in (tmp_path / "README.md").read_text()
    changed = apply_branding(CFG, tmp_path)
    assert changed == ["README.md", "assets/default_logo.png"]
    assert (tmp_path / "README.md").read_text() == "# DemoApp 0.1.0\n![](assets/default_logo.png)\n"
    assert (tmp_path / "assets" / "default_logo.png").read_bytes() == DEFAULT_IMAGE
    assert apply_branding(CFG, tmp_path) == []


def test_default_image_is_a_valid_png():
    assert Image.open(io.BytesIO(DEFAULT_IMAGE)).size == (1, 1)


def test_unknown_placeholder_writes_nothing(tmp_path):
    (tmp_path / "a.md").write_text("{{PROJECT_NAME}}\n")
    (tmp_path / "b.md").write_text("{{UNKNOWN}}\n")
    with pytest.raises(UnresolvedPlaceholder):
        apply_branding(CFG, tmp_path)
    assert (tmp_path / "a.md").read_text() == "{{PROJECT_NAME}}\n"


def test_missing_logo_without_defaults(tmp_path):
    cfg = ProjectConfig("DemoApp", "1", branding={"logo": "nope.png"})
    (tmp_path / "a.md").write_text("{{LOGO}}\n")
    with pytest.raises(MissingFile):
        apply_branding(cfg, tmp_path)
    strict = ProjectConfig("DemoApp", "1", allow_default_images=False)
    with pytest.raises(UnresolvedPlaceholder):
        apply_branding(strict, tmp_path)


def test_project_config_guards():
    with pytest.raises(ValueError):
        ProjectConfig("!!!", "1")
    with pytest.raises(ValueError):
        ProjectConfig("x", "1", branding={"banner": "a.png"})


def test_empty_tag_list_gains_hide_tag():
    cell = Cell("code", ("x",), {"tags": []})
    assert inject_hide_tags(new_notebook([cell])).cells[0].tags == (HIDE_TAG,)
